#include "qcode/prompts.hpp"

#include <fstream>
#include <sstream>

#include "qcode/common.hpp"

namespace qcode::prompts {

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
  std::string out(tmpl);
  for (const auto& [key, value] : vars) {
    const std::string needle = "{" + key + "}";
    std::size_t pos = 0;
    while ((pos = out.find(needle, pos)) != std::string::npos) {
      out.replace(pos, needle.size(), value);
      pos += value.size();
    }
  }
  return out;
}

void PromptSet::apply_overrides(const std::map<std::string, std::string>& name_to_path) {
  auto load = [](const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read prompt template: " + path);
    std::ostringstream body;
    body << in.rdbuf();
    return body.str();
  };
  for (const auto& [name, path] : name_to_path) {
    if (name == "coder_system") coder_system = load(path);
    else if (name == "open_coding") open_coding = load(path);
    else if (name == "high_level") high_level = load(path);
    else if (name == "classify_system") classify_system = load(path);
    else if (name == "classify") classify = load(path);
    else if (name == "judge_system") judge_system = load(path);
    else if (name == "fitness") fitness = load(path);
    else if (name == "coverage") coverage = load(path);
    else if (name == "revise_system") revise_system = load(path);
    else if (name == "revise") revise = load(path);
    else if (name == "select") select = load(path);
    else if (name == "align") align = load(path);
    else if (name == "report") report = load(path);
    else throw ConfigError("unknown prompt template name: " + name);
  }
}

}  // namespace qcode::prompts
