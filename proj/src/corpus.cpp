#include "qcode/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace qcode {

CorpusFormat corpus_format_from_string(const std::string& s) {
  if (s == "jsonl") return CorpusFormat::jsonl;
  if (s == "plain-dir" || s == "plain_dir") return CorpusFormat::plain_dir;
  throw ConfigError("unknown corpus format: " + s);
}

namespace {

std::vector<Document> load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corpus file: " + path);
  std::vector<Document> docs;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ": malformed JSON record: " << e.what();
      throw ValidationError(msg.str());
    }
    if (!rec.is_object() || !rec.contains("id") || !rec.contains("text") ||
        !rec["id"].is_string() || !rec["text"].is_string()) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ": record must carry string \"id\" and \"text\" fields";
      throw ValidationError(msg.str());
    }
    Document doc;
    doc.id = rec["id"].get<std::string>();
    doc.text = rec["text"].get<std::string>();
    if (doc.text.empty()) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ": document text is empty";
      throw ValidationError(msg.str());
    }
    if (rec.contains("meta") && rec["meta"].is_object()) {
      for (auto& [k, v] : rec["meta"].items()) {
        doc.meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
      }
    }
    if (!seen.insert(doc.id).second) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ": duplicate document id \"" << doc.id << "\"";
      throw ValidationError(msg.str());
    }
    docs.push_back(std::move(doc));
  }
  if (docs.empty()) log_warn("corpus " + path + " is empty");
  return docs;
}

std::vector<Document> load_plain_dir(const std::string& path) {
  if (!fs::is_directory(path)) throw ConfigError("corpus directory does not exist: " + path);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(path)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<Document> docs;
  std::set<std::string> seen;
  for (const auto& file : files) {
    std::ifstream in(file);
    if (!in) throw ValidationError("cannot read corpus file: " + file.string());
    std::ostringstream body;
    body << in.rdbuf();
    Document doc;
    doc.id = file.stem().string();
    doc.text = body.str();
    if (doc.text.empty()) throw ValidationError("empty document: " + file.string());
    if (!seen.insert(doc.id).second) {
      throw ValidationError("duplicate document id \"" + doc.id + "\" in " + path);
    }
    docs.push_back(std::move(doc));
  }
  if (docs.empty()) log_warn("corpus directory " + path + " contains no .txt files");
  return docs;
}

}  // namespace

std::vector<Document> load_corpus(const std::string& path, CorpusFormat format) {
  switch (format) {
    case CorpusFormat::jsonl:
      return load_jsonl(path);
    case CorpusFormat::plain_dir:
      return load_plain_dir(path);
  }
  throw ConfigError("unhandled corpus format");
}

std::vector<Chunk> chunk_document(const Document& doc, std::size_t chunk_size,
                                  std::size_t overlap) {
  if (chunk_size == 0 || overlap >= chunk_size) {
    throw ConfigError("chunking requires 0 <= overlap < chunk_size");
  }
  std::vector<std::string> words = split_words(doc.text);
  std::vector<Chunk> chunks;
  if (words.empty()) return chunks;

  const std::size_t stride = chunk_size - overlap;
  std::size_t start = 0;
  int index = 0;
  for (;;) {
    std::size_t end = std::min(start + chunk_size, words.size());
    Chunk chunk;
    chunk.doc_id = doc.id;
    chunk.index = index;
    chunk.id = doc.id + "#" + std::to_string(index);
    chunk.start_word = start;
    chunk.end_word = end;
    std::ostringstream text;
    for (std::size_t w = start; w < end; ++w) {
      if (w > start) text << ' ';
      text << words[w];
    }
    chunk.text = text.str();
    chunks.push_back(std::move(chunk));
    if (end == words.size()) break;
    start += stride;
    ++index;
  }
  return chunks;
}

CorpusSplit split_corpus(const std::vector<std::string>& datapoint_ids, double test_fraction,
                         std::uint64_t seed) {
  if (datapoint_ids.size() < 2) {
    throw ValidationError("split requires at least 2 datapoints");
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie in (0, 1)");
  }
  std::vector<std::string> ids = datapoint_ids;
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.size() < 2) throw ValidationError("split requires at least 2 distinct datapoints");

  DetRng rng(seed ^ fnv1a64("corpus-split"));
  rng.shuffle(ids);

  const std::size_t n = ids.size();
  std::size_t n_test = static_cast<std::size_t>(
      std::llround(test_fraction * static_cast<double>(n)));
  n_test = std::max<std::size_t>(1, std::min(n_test, n - 1));

  CorpusSplit split;
  split.seed = seed;
  split.test_fraction = test_fraction;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_test) {
      split.test_ids.insert(ids[i]);
    } else {
      split.train_ids.insert(ids[i]);
    }
  }
  return split;
}

}  // namespace qcode
