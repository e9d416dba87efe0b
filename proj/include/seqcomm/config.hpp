#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqcomm/env.hpp"
#include "seqcomm/trainer.hpp"

namespace seqcomm::cli {

struct EnvSpec {
    std::string type = "matrix";  // "matrix" | "particle"
    env::ParticleSpec particle;
};

struct ExperimentConfig {
    EnvSpec env;
    train::OrderingMode mode = train::OrderingMode::Simultaneous;
    proto::OrderSequence fixed_order;
    train::PpoConfig ppo;
    std::vector<uint64_t> seeds = {1};
    std::string out_dir = "runs";
    std::string run_id = "run";
};

// Strict parse: unknown keys are rejected with a diagnostic naming the key,
// and all values are validated before any run starts.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

std::unique_ptr<env::Env> make_env(const EnvSpec& spec);

}  // namespace seqcomm::cli
