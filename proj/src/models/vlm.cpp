#include "vitask/models/vlm.hpp"

#include <algorithm>
#include <stdexcept>

#include "vitask/numerics/ops.hpp"

namespace vitask::models {

namespace ops = numerics;

std::string to_string(EpVariant v) {
  switch (v) {
    case EpVariant::none: return "none";
    case EpVariant::cls: return "cls";
    case EpVariant::all: return "all";
    case EpVariant::rep: return "rep";
  }
  return "none";
}

EpVariant parse_ep_variant(const std::string& text) {
  if (text == "none") return EpVariant::none;
  if (text == "cls") return EpVariant::cls;
  if (text == "all") return EpVariant::all;
  if (text == "rep") return EpVariant::rep;
  throw std::invalid_argument("unknown exemplar variant '" + text + "' (expected none, cls, all or rep)");
}

namespace {

std::size_t image_slot(const data::TokenIds& instruction) {
  if (instruction.empty() || instruction.front() != data::special::kUser) {
    throw std::invalid_argument("instruction must start with the user marker");
  }
  const auto n = std::count(instruction.begin(), instruction.end(), data::special::kImage);
  if (n != 1) throw std::invalid_argument("instruction must contain exactly one image placeholder");
  const std::size_t slot =
      static_cast<std::size_t>(std::find(instruction.begin(), instruction.end(), data::special::kImage) - instruction.begin());
  if (slot + 1 == instruction.size()) throw std::invalid_argument("instruction must end after the image placeholder");
  return slot;
}

std::size_t exemplar_rows(const DecoderModel& model, EpVariant variant) {
  switch (variant) {
    case EpVariant::none: return 0;
    case EpVariant::cls: return 1;
    case EpVariant::all: return model.dims().patches;
    case EpVariant::rep: return 0;
  }
  return 0;
}

}  // namespace

std::size_t prefix_length(const DecoderModel& model, const data::TokenIds& instruction, EpVariant variant) {
  image_slot(instruction);
  return instruction.size() - 1 + model.dims().patches + exemplar_rows(model, variant);
}

Var build_sequence(const DecoderModel& model, const PromptParts& parts, const data::TokenIds& continuation,
                   std::size_t& assistant_row) {
  if (!parts.image || !parts.instruction) throw std::invalid_argument("prompt needs an image and an instruction");
  const data::TokenIds& instr = *parts.instruction;
  const std::size_t slot = image_slot(instr);
  if (parts.variant != EpVariant::none && !parts.exemplar) {
    throw std::invalid_argument("exemplar prompting (" + to_string(parts.variant) + ") requires a task-specific model");
  }

  std::vector<Var> pieces;
  pieces.push_back(model.token_embeddings(data::TokenIds(instr.begin(), instr.begin() + static_cast<std::ptrdiff_t>(slot))));
  switch (parts.variant) {
    case EpVariant::none:
      pieces.push_back(model.image_embeddings(*parts.image));
      break;
    case EpVariant::cls:
      pieces.push_back(model.image_embeddings(*parts.image));
      pieces.push_back(model.exemplar_embeddings(numerics::Tensor({1, parts.exemplar->cls.size()},
                                                                  std::vector<double>(parts.exemplar->cls.values().begin(),
                                                                                      parts.exemplar->cls.values().end()))));
      break;
    case EpVariant::all:
      pieces.push_back(model.image_embeddings(*parts.image));
      pieces.push_back(model.exemplar_embeddings(parts.exemplar->patches));
      break;
    case EpVariant::rep:
      if (parts.exemplar->patches.rows() != model.dims().patches) {
        throw std::invalid_argument("replacement exemplars must match the image patch count");
      }
      pieces.push_back(model.exemplar_embeddings(parts.exemplar->patches));
      break;
  }
  data::TokenIds rest(instr.begin() + static_cast<std::ptrdiff_t>(slot) + 1, instr.end());
  rest.insert(rest.end(), continuation.begin(), continuation.end());
  pieces.push_back(model.token_embeddings(rest));
  assistant_row = prefix_length(model, instr, parts.variant) - 1;
  return ops::concat_rows(pieces);
}

ResponseLogits vlm_forward(const DecoderModel& model, const std::vector<double>& image,
                           const data::TokenIds& instruction, const data::TokenIds& response,
                           const ExemplarFeatures* exemplar, EpVariant variant, bool adapters_on) {
  if (response.empty()) throw std::invalid_argument("empty response");
  for (std::size_t id : response) {
    if (id >= model.dims().vocab) throw std::out_of_range("response token id outside the vocabulary");
  }
  const data::TokenIds continuation(response.begin(), response.end() - 1);
  std::size_t assistant_row = 0;
  const Var seq = build_sequence(model, {&image, &instruction, exemplar, variant}, continuation, assistant_row);
  ResponseLogits out;
  out.logits = model.forward(seq, assistant_row, response.size(), adapters_on);
  out.ep_used = variant != EpVariant::none;
  out.ep_variant = variant;
  return out;
}

ResponseLogits vlm_forward(const data::InstructionRecord& record, const DecoderModel& model, const TsmModel* tsm,
                           EpVariant variant, bool adapters_on) {
  std::optional<ExemplarFeatures> exemplar;
  if (variant != EpVariant::none) {
    if (!tsm) throw std::invalid_argument("exemplar prompting (" + to_string(variant) + ") requires a task-specific model");
    exemplar = extract_exemplar(*tsm, record.image_features, model.dims().patches);
  }
  return vlm_forward(model, record.image_features, record.instruction_tokens, record.response_tokens,
                     exemplar ? &*exemplar : nullptr, variant, adapters_on);
}

}  // namespace vitask::models
