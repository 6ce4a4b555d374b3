#pragma once

#include <cstdint>
#include <vector>

#include "vitask/data/instruction.hpp"
#include "vitask/models/decoder.hpp"
#include "vitask/pipeline/config.hpp"

namespace vitask::pipeline {

/// Generic instruction-following corpus over the built-in datasets: each
/// record lists a random subset of a dataset's classes in random order and
/// answers with one of them, chosen uniformly and independent of the image.
/// A `no_list_fraction` share omits the list and answers with any class of
/// that dataset. A `hint_fraction` share carries the answer's first word
/// right after the image, in the row exemplar prompting later occupies.
std::vector<data::InstructionRecord> make_warmup_corpus(const data::Vocabulary& vocab,
                                                        const data::InstructionTemplate& tmpl,
                                                        const std::vector<data::DatasetInfo>& datasets,
                                                        std::size_t records, double no_list_fraction,
                                                        double hint_fraction, std::size_t input_dim,
                                                        std::uint64_t seed);

/// Stand-in for a pre-trained decoder: trains the base weights (adapters off,
/// connectors untouched) on the generic corpus with next-token NLL. The
/// result is blind to the image block by construction.
models::DecoderModel warm_up_decoder(const data::Vocabulary& vocab, const TrainingConfig& config);

}  // namespace vitask::pipeline
