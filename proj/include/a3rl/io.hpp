#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "a3rl/agent.hpp"
#include "a3rl/nn.hpp"
#include "a3rl/trainer.hpp"

namespace a3rl::io {

/// Flat JSON object with every ExperimentConfig field (mode as its label).
std::string config_to_json(const trainer::ExperimentConfig& config);

/// Parses a flat JSON object over the defaults. Unknown keys, wrong value
/// types and constraint violations are all collected and reported together
/// in one ConfigError.
trainer::ExperimentConfig config_from_json(const std::string& text);
trainer::ExperimentConfig load_config(const std::filesystem::path& path);
std::vector<std::string> config_keys();

/// FNV-1a over the canonical JSON dump, as 16 hex digits.
std::string config_hash(const trainer::ExperimentConfig& config);

/// One named parameter block of a checkpoint.
struct ParamBlock {
    std::string name;
    nn::NetSpec spec;
    std::vector<float> values;
};

/// "A3RLCK1\n", a u32 little-endian header length, the JSON header (module,
/// config hash, env step, block shapes), then every block as f32 LE values.
struct Checkpoint {
    std::string module = "agent";
    std::string config_hash;
    std::int64_t env_step = 0;
    std::vector<ParamBlock> blocks;
};

Checkpoint make_checkpoint(const agent::Agent& agent, const std::string& config_hash, std::int64_t env_step);
/// Copies the blocks back into `agent`; throws DimensionError on any shape mismatch.
void restore(const Checkpoint& ckpt, agent::Agent& agent);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace a3rl::io
