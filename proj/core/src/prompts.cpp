#include "retroclass/prompts.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "retroclass/error.hpp"

namespace retroclass {

namespace {

// Trim and collapse whitespace runs to single spaces.
std::string squeeze(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(ch);
  }
  return out;
}

std::vector<float> copy_row(const EmbeddingBank& bank, std::size_t i) {
  const auto r = bank.row(i);
  return {r.begin(), r.end()};
}

}  // namespace

PromptTemplate PromptTemplate::generic() {
  return {std::string(kGenericPrefix), PromptStyle::kGeneric, std::nullopt};
}

PromptTemplate PromptTemplate::domain_specific(std::string domain_word) {
  std::string prefix = "a " + squeeze(domain_word) + " of a";
  return {std::move(prefix), PromptStyle::kDomainSpecific,
          std::move(domain_word)};
}

PromptTemplate PromptTemplate::from_prefix(std::string prefix) {
  if (squeeze(prefix) == kGenericPrefix) return generic();
  return {std::move(prefix), PromptStyle::kCustom, std::nullopt};
}

std::string expand_template(const PromptTemplate& tmpl,
                            std::string_view class_name) {
  const std::string name = squeeze(class_name);
  if (name.empty()) throw Error(ErrorCode::kEmptyClassName, "class name is empty");

  std::string text = tmpl.prefix;
  for (std::string_view slot : {std::string_view("{CLS}"), std::string_view("{}")}) {
    if (auto pos = text.find(slot); pos != std::string::npos) {
      text.replace(pos, slot.size(), name);
      return squeeze(text);
    }
  }
  return squeeze(text + " " + name);
}

ClassConfig parse_class_config(std::string_view json) {
  ClassConfig config;
  try {
    const auto j = nlohmann::json::parse(json);
    for (const auto& c : j.at("classes")) {
      ClassEntry entry;
      entry.name = c.at("name").get<std::string>();
      if (auto it = c.find("aliases"); it != c.end()) {
        entry.aliases = it->get<std::vector<std::string>>();
      }
      config.classes.push_back(std::move(entry));
    }
    if (auto it = j.find("zeroshot_prefix"); it != j.end()) {
      config.zeroshot_prefix = it->get<std::string>();
    }
    if (auto it = j.find("retrieval_prefix"); it != j.end()) {
      config.retrieval_prefix = it->get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig,
                std::string("class config: ") + e.what());
  }
  for (const auto& c : config.classes) {
    if (squeeze(c.name).empty()) {
      throw Error(ErrorCode::kEmptyClassName, "class config has an empty name");
    }
    for (const auto& a : c.aliases) {
      if (squeeze(a).empty()) {
        throw Error(ErrorCode::kEmptyClassName,
                    "class '" + c.name + "' has an empty alias");
      }
    }
  }
  return config;
}

std::string to_json(const ClassConfig& config) {
  nlohmann::ordered_json j;
  j["classes"] = nlohmann::ordered_json::array();
  for (const auto& c : config.classes) {
    nlohmann::ordered_json entry;
    entry["name"] = c.name;
    entry["aliases"] = c.aliases;
    j["classes"].push_back(std::move(entry));
  }
  j["zeroshot_prefix"] = config.zeroshot_prefix;
  j["retrieval_prefix"] = config.retrieval_prefix;
  return j.dump(2);
}

ClassConfig load_class_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_class_config(ss.str());
}

void save_class_config(const ClassConfig& config,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + path.string() + "'");
  out << to_json(config) << '\n';
}

std::size_t prompt_row_count(const ClassConfig& config) {
  std::size_t rows = 0;
  for (const auto& c : config.classes) rows += 1 + c.aliases.size();
  return rows;
}

std::vector<std::string> render_prompts(const ClassConfig& config,
                                        PromptKind kind) {
  const auto tmpl = PromptTemplate::from_prefix(
      kind == PromptKind::kZeroShot ? config.zeroshot_prefix
                                    : config.retrieval_prefix);
  std::vector<std::string> out;
  out.reserve(prompt_row_count(config));
  for (const auto& c : config.classes) {
    out.push_back(expand_template(tmpl, c.name));
    for (const auto& a : c.aliases) out.push_back(expand_template(tmpl, a));
  }
  return out;
}

std::vector<ClassSpec> build_class_specs(
    const ClassConfig& config, const EmbeddingBank& prototype_bank,
    const EmbeddingBank& retrieval_query_bank) {
  const std::size_t rows = prompt_row_count(config);
  if (prototype_bank.count() != rows || retrieval_query_bank.count() != rows) {
    throw Error(ErrorCode::kPromptBankMismatch,
                "class config needs " + std::to_string(rows) +
                    " prompt rows; prototype bank has " +
                    std::to_string(prototype_bank.count()) +
                    ", retrieval bank has " +
                    std::to_string(retrieval_query_bank.count()));
  }

  const auto zs = PromptTemplate::from_prefix(config.zeroshot_prefix);
  const auto rt = PromptTemplate::from_prefix(config.retrieval_prefix);
  std::vector<ClassSpec> specs;
  specs.reserve(config.classes.size());
  std::size_t row = 0;
  for (std::size_t n = 0; n < config.classes.size(); ++n) {
    const auto& entry = config.classes[n];
    ClassSpec spec;
    spec.index = n;
    spec.name = squeeze(entry.name);
    for (const auto& a : entry.aliases) spec.aliases.push_back(squeeze(a));
    spec.zeroshot_prompt = expand_template(zs, spec.name);
    spec.retrieval_prompt = expand_template(rt, spec.name);
    for (std::size_t a = 0; a <= entry.aliases.size(); ++a, ++row) {
      spec.alias_prototypes.push_back(copy_row(prototype_bank, row));
      spec.alias_retrieval_queries.push_back(copy_row(retrieval_query_bank, row));
    }
    spec.prototype = merge_alias_prototypes(spec.alias_prototypes);
    spec.retrieval_query = merge_alias_prototypes(spec.alias_retrieval_queries);
    spec.retrieval_space_tag = retrieval_query_bank.space_tag();
    specs.push_back(std::move(spec));
  }
  return specs;
}

std::vector<float> merge_alias_prototypes(
    std::span<const std::vector<float>> vectors) {
  if (vectors.empty()) throw Error(ErrorCode::kEmptyMerge, "nothing to merge");
  if (vectors.size() == 1) return vectors.front();

  const std::size_t dim = vectors.front().size();
  std::vector<double> sum(dim, 0.0);
  for (const auto& v : vectors) {
    if (v.size() != dim) {
      throw Error(ErrorCode::kDimensionMismatch, "alias vectors differ in dim");
    }
    for (std::size_t j = 0; j < dim; ++j) sum[j] += v[j];
  }
  double norm = 0.0;
  for (double& s : sum) {
    s /= static_cast<double>(vectors.size());
    norm += s * s;
  }
  norm = std::sqrt(norm);
  if (norm < kZeroNormThreshold) {
    throw Error(ErrorCode::kDegenerateMerge, "alias vectors cancel out");
  }
  std::vector<float> out(dim);
  for (std::size_t j = 0; j < dim; ++j) out[j] = static_cast<float>(sum[j] / norm);
  return out;
}

}  // namespace retroclass
