#pragma once

#include <filesystem>

#include "azmi/adam.hpp"
#include "azmi/scvae.hpp"

namespace azmi::scvae {

/// Write `model.json` (parameter names/shapes in registration order,
/// model/training hyper-parameters, format_version) and `model.f32` (the
/// concatenated little-endian float payload in manifest order). When adam
/// is given, `adam.f32` holds the moment accumulators for resumable runs.
void save_model(const std::filesystem::path& dir, const ScvaeModel<float>& model,
                const HyperParams& hyper, const nn::AdamState<float>* adam = nullptr);

/// Read back the architecture/hyper sections of `model.json`.
ModelConfig read_model_config(const std::filesystem::path& dir);
HyperParams read_model_hyper(const std::filesystem::path& dir);

/// Fill a model (and optionally ADAM state) from a checkpoint directory;
/// names and shapes must match the model's parameter store exactly.
void load_model_params(const std::filesystem::path& dir, ScvaeModel<float>& model,
                       nn::AdamState<float>* adam = nullptr);

}  // namespace azmi::scvae
