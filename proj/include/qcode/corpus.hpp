#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "qcode/common.hpp"

namespace qcode {

struct ResearchQuestion {
  std::string id;
  std::string text;
};

struct Document {
  std::string id;
  std::string text;
  std::map<std::string, std::string> meta;
};

// A contiguous word span of one document. Offsets are half-open word indices.
struct Chunk {
  std::string id;
  std::string doc_id;
  int index = 0;
  std::size_t start_word = 0;
  std::size_t end_word = 0;
  std::string text;
};

struct CorpusSplit {
  std::set<std::string> train_ids;
  std::set<std::string> test_ids;
  std::uint64_t seed = 0;
  double test_fraction = 0.0;
};

enum class CorpusFormat { jsonl, plain_dir };

CorpusFormat corpus_format_from_string(const std::string& s);

// jsonl: one object per line with required "id" and "text", optional "meta".
// plain_dir: every *.txt file is one document, id = filename stem.
std::vector<Document> load_corpus(const std::string& path, CorpusFormat format);

// Sliding-window chunking over whitespace words. Chunks start at stride
// chunk_size - overlap; the final chunk ends at the document end. A document
// with at most chunk_size words yields exactly one chunk; an empty document
// yields none.
std::vector<Chunk> chunk_document(const Document& doc, std::size_t chunk_size = 2048,
                                  std::size_t overlap = 200);

// Seeded, deterministic partition of datapoint ids. |test| is
// round(test_fraction * N) clamped to [1, N-1]. Ids are sorted before the
// seeded shuffle so the result does not depend on input order.
CorpusSplit split_corpus(const std::vector<std::string>& datapoint_ids, double test_fraction,
                         std::uint64_t seed);

}  // namespace qcode
