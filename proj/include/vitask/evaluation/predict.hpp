#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vitask/data/types.hpp"
#include "vitask/data/vocabulary.hpp"
#include "vitask/evaluation/metrics.hpp"
#include "vitask/models/decoder.hpp"
#include "vitask/models/tsm.hpp"
#include "vitask/models/vlm.hpp"

namespace vitask::evaluation {

enum class DecodeMode { greedy, class_likelihood };

std::string to_string(DecodeMode m);
DecodeMode parse_decode_mode(const std::string& text);

/// Inference-time exemplar setting.
struct EpConfig {
  const models::TsmModel* tsm = nullptr;
  models::EpVariant variant = models::EpVariant::none;
  bool adapters_on = true;
};

/// Tokenized responses (class name + <eos>) in label order.
std::vector<data::TokenIds> class_responses(const data::DatasetInfo& info, const data::Vocabulary& vocab);

/// Greedy: arg-max decoding until <eos> (or the longest class response plus
/// one token), matched exactly against `classes`; kReject when unmatched.
/// Class likelihood: arg-max over classes of the mean per-token
/// log-probability; never kReject.
std::size_t predict(const models::DecoderModel& model, const data::InstructionRecord& record, DecodeMode mode,
                    const EpConfig& ep, const std::vector<data::TokenIds>& classes);

/// Token ids produced by greedy decoding, including <eos> when reached.
data::TokenIds greedy_decode(const models::DecoderModel& model, const data::InstructionRecord& record,
                             const EpConfig& ep, std::size_t max_tokens);

/// Predicts every record and scores the result.
MetricsReport evaluate(const models::DecoderModel& model, const std::vector<data::InstructionRecord>& records,
                       DecodeMode mode, const EpConfig& ep, const data::DatasetInfo& info,
                       const data::Vocabulary& vocab);

}  // namespace vitask::evaluation
