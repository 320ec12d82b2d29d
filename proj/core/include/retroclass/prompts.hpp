#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "retroclass/embank.hpp"

namespace retroclass {

enum class PromptStyle { kGeneric, kDomainSpecific, kCustom };

// A prefix such as "a photo of a". A "{}" or "{CLS}" placeholder in the
// prefix marks where the class name goes; otherwise the name is appended.
struct PromptTemplate {
  std::string prefix;
  PromptStyle style = PromptStyle::kCustom;
  std::optional<std::string> domain_word;

  static PromptTemplate generic();
  // "a {domain} of a", e.g. domain_specific("circuit diagram").
  static PromptTemplate domain_specific(std::string domain_word);
  static PromptTemplate from_prefix(std::string prefix);
};

inline constexpr std::string_view kGenericPrefix = "a photo of a";

// Renders the prompt with single spaces and no surrounding whitespace.
// Articles are emitted verbatim ("a amplifier").
std::string expand_template(const PromptTemplate& tmpl,
                            std::string_view class_name);

struct ClassEntry {
  std::string name;
  std::vector<std::string> aliases;

  bool operator==(const ClassEntry&) const = default;
};

// {"classes": [{"name": str, "aliases": [str]}],
//  "zeroshot_prefix": str, "retrieval_prefix": str}
struct ClassConfig {
  std::vector<ClassEntry> classes;
  std::string zeroshot_prefix = std::string(kGenericPrefix);
  std::string retrieval_prefix = std::string(kGenericPrefix);

  bool operator==(const ClassConfig&) const = default;
};

ClassConfig parse_class_config(std::string_view json);
std::string to_json(const ClassConfig& config);
ClassConfig load_class_config(const std::filesystem::path& path);
void save_class_config(const ClassConfig& config,
                       const std::filesystem::path& path);

// Rows expected in a prompt-embedding bank: per class, name then aliases.
std::size_t prompt_row_count(const ClassConfig& config);

enum class PromptKind { kZeroShot, kRetrieval };

// Every prompt in bank row order; feed these to the text encoders.
std::vector<std::string> render_prompts(const ClassConfig& config,
                                        PromptKind kind);

struct ClassSpec {
  std::size_t index = 0;
  std::string name;
  std::vector<std::string> aliases;
  std::string zeroshot_prompt;
  std::string retrieval_prompt;

  // One entry per (name, aliases...) in config order, unmerged.
  std::vector<std::vector<float>> alias_prototypes;
  std::vector<std::vector<float>> alias_retrieval_queries;

  // Alias-merged vectors: W_n in VLM-text space, v_n in LLM space.
  std::vector<float> prototype;
  std::vector<float> retrieval_query;
  // Space tag of the retrieval-query bank, used when searching with v_n.
  std::string retrieval_space_tag;
};

// prototype_bank (VLM text) and retrieval_query_bank (LLM) hold the encoded
// zero-shot and retrieval prompts in render_prompts() order.
std::vector<ClassSpec> build_class_specs(const ClassConfig& config,
                                         const EmbeddingBank& prototype_bank,
                                         const EmbeddingBank& retrieval_query_bank);

// Renormalized arithmetic mean of unit vectors.
std::vector<float> merge_alias_prototypes(
    std::span<const std::vector<float>> vectors);

}  // namespace retroclass
