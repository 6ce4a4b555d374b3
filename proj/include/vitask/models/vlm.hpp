#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vitask/data/types.hpp"
#include "vitask/models/decoder.hpp"
#include "vitask/models/tsm.hpp"

namespace vitask::models {

/// Exemplar prompting variants: none; one CLS exemplar after the image; all P
/// patch exemplars after the image; patch exemplars replacing the image.
enum class EpVariant { none, cls, all, rep };

std::string to_string(EpVariant v);
EpVariant parse_ep_variant(const std::string& text);

/// Logits [T, V]; row t predicts response token t.
struct ResponseLogits {
  Var logits;
  bool ep_used = false;
  EpVariant ep_variant = EpVariant::none;

  std::size_t rows() const { return logits.value().rows(); }
};

/// Forward inputs for one sequence: image, instruction (with its single
/// <image> placeholder) and the teacher-forced continuation.
struct PromptParts {
  const std::vector<double>* image = nullptr;
  const data::TokenIds* instruction = nullptr;
  const ExemplarFeatures* exemplar = nullptr;
  EpVariant variant = EpVariant::none;
};

/// Sequence layout: tokens before <image>, image rows (or exemplar rows for
/// rep), exemplar rows (cls, all), remaining instruction tokens, then
/// `continuation`. Returns [n, d_model] and sets `assistant_row` to the row
/// of the instruction's final token.
Var build_sequence(const DecoderModel& model, const PromptParts& parts, const data::TokenIds& continuation,
                   std::size_t& assistant_row);

/// Number of rows before the continuation.
std::size_t prefix_length(const DecoderModel& model, const data::TokenIds& instruction, EpVariant variant);

/// Teacher-forced logits for `response` given image and instruction.
ResponseLogits vlm_forward(const DecoderModel& model, const std::vector<double>& image,
                           const data::TokenIds& instruction, const data::TokenIds& response,
                           const ExemplarFeatures* exemplar, EpVariant variant, bool adapters_on = true);

/// Record form; the exemplar is extracted from `tsm` when a variant is set.
ResponseLogits vlm_forward(const data::InstructionRecord& record, const DecoderModel& model, const TsmModel* tsm,
                           EpVariant variant, bool adapters_on = true);

}  // namespace vitask::models
