#pragma once
// Model hyperparameters shared by the model zoo, the training engine, the
// checkpoint format, and the CLI config layer.

#include "ltx/common.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ltx {

// Reserved vocabulary ids, fixed across every file format.
inline constexpr int32_t kPadId = 0;
inline constexpr int32_t kBosId = 1;
inline constexpr int32_t kEosId = 2;
inline constexpr int32_t kUnkId = 3;

enum class PosteriorKind { DiagGaussian, Deterministic, SphericalNoisy };
enum class PriorKind { Gaussian, SphereUniform };

struct ModelConfig {
    int64_t lstm_units = 512;
    int64_t embed_dim = 128;
    int64_t latent_dim = 100;
    int64_t vocab_size = 0;
    PosteriorKind posterior = PosteriorKind::Deterministic;
    PriorKind prior = PriorKind::Gaussian;
    std::vector<int64_t> discriminator_layers = {300, 300, 300};
    bool adversarial = false;  // model carries a discriminator
    double lambda = 0.0;       // weight of the adversarial term in the encoder objective
    double word_dropout_keep = 1.0;
    double rnn_dropout_keep = 1.0;
    double noise_sigma = 0.0;
    double noise_half_life = 0.0;  // >0: sigma halves every this many steps
    bool use_bow_loss = false;
    bool renormalize_after_noise = false;
    bool kl_annealed = false;  // VAE objective with the KL ramp
    bool is_lm = false;        // decoder-only language model

    void validate() const;
};

std::string posterior_name(PosteriorKind k);
std::string prior_name(PriorKind k);
PosteriorKind posterior_from_name(const std::string& s);
PriorKind prior_from_name(const std::string& s);

std::map<std::string, std::string> model_config_to_kv(const ModelConfig& cfg);
ModelConfig model_config_from_kv(const std::map<std::string, std::string>& kv);

}  // namespace ltx
