#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "a3rl/nn.hpp"
#include "a3rl/rng.hpp"

namespace a3rl::env {

enum class EnvKind { PointReach, PointMaze, Bandit };
enum class RewardKind { Dense, Sparse };

/// Axis-aligned wall segment from (x0, y0) to (x1, y1).
struct Wall {
    float x0, y0, x1, y1;
};

/// Static description of a task. Point-mass states are (px, py, vx, vy);
/// actions are accelerations in [-1, 1]^2.
struct EnvSpec {
    std::string name;
    EnvKind kind = EnvKind::PointReach;
    int state_dim = 4;
    int action_dim = 2;
    int horizon = 200;
    RewardKind reward = RewardKind::Dense;

    float dt = 0.05f;
    float damping = 0.05f;
    std::array<float, 2> goal{2.0f, 2.0f};
    float goal_radius = 0.1f;
    float start_noise = 0.01f;

    /// Maze only: arena [lo, hi]^2 and walls with a collision band of
    /// +-wall_half_width around each segment.
    std::vector<Wall> walls;
    float arena_lo = 0.0f;
    float arena_hi = 0.0f;
    float wall_half_width = 0.05f;

    /// Bandit only: deterministic reward per arm.
    std::vector<double> arm_rewards;
};

EnvSpec point_reach();
EnvSpec point_maze();

/// One-step K-armed bandit. The action is a one-element vector holding the
/// arm index; the state is the constant (0).
EnvSpec bandit_env(int num_arms, std::vector<double> rewards);

/// "PointReach" or "PointMaze". Throws ConfigError otherwise.
EnvSpec make_env(const std::string& name);
std::vector<std::string> env_names();

using State = std::vector<float>;
using Action = std::vector<float>;

/// Point-mass envs start at the origin with zero velocity plus uniform noise
/// in +-start_noise on every coordinate.
State reset(const EnvSpec& spec, Rng& rng);
State reset(const EnvSpec& spec, std::uint64_t seed);

struct StepResult {
    State next_state;
    float reward = 0.0f;
    bool done = false;  ///< goal reached / bandit pulled; never set by the time limit
};

/// Deterministic transition. Actions are clipped to [-1, 1].
StepResult step(const EnvSpec& spec, std::span<const float> state, std::span<const float> action);

bool at_goal(const EnvSpec& spec, std::span<const float> state);

/// True when (x, y) lies inside the collision band of any wall.
bool in_wall(const EnvSpec& spec, float x, float y);

// ---------------------------------------------------------------------------
// Transitions and offline data

enum class Source : std::uint8_t { Online, Offline };

struct Transition {
    std::vector<float> s;
    std::vector<float> a;
    float r = 0.0f;
    std::vector<float> s_next;
    bool done = false;
    Source source = Source::Online;
};

enum class BehaviorPolicy { Random, Medium, Expert, Mix };

std::string to_string(BehaviorPolicy p);
/// Throws ConfigError naming the valid labels.
BehaviorPolicy policy_from_string(const std::string& name);
std::vector<std::string> policy_names();

/// Fractions of random / medium / expert data in a "mix" dataset.
struct MixProportions {
    double random = 1.0 / 3.0;
    double medium = 1.0 / 3.0;
    double expert = 1.0 / 3.0;
};

/// Contiguous store of offline transitions (all tagged Offline).
struct OfflineDataset {
    std::string env_name;
    int state_dim = 0;
    int action_dim = 0;
    std::string policy;
    std::uint64_t seed = 0;

    nn::Matrix states;
    nn::Matrix actions;
    std::vector<float> rewards;
    nn::Matrix next_states;
    std::vector<std::uint8_t> dones;

    std::size_t size() const { return rewards.size(); }
    bool empty() const { return rewards.empty(); }
    Transition at(std::size_t i) const;
    void reserve(std::size_t n);
    void append(const Transition& t);
};

/// Proportional-derivative controller used by the scripted policies:
/// a = clip(1.5 (target - p) - 0.8 v, -1, 1). The target is the goal, or in
/// the maze the next waypoint of a route around the walls.
Action expert_action(const EnvSpec& spec, std::span<const float> state);

Action behavior_action(const EnvSpec& spec, BehaviorPolicy policy, std::span<const float> state, Rng& rng);

/// Rolls out the scripted policy until exactly `n` transitions are recorded.
/// Horizon truncation starts a new episode without setting `done`.
OfflineDataset generate_offline(const EnvSpec& spec, BehaviorPolicy policy, std::size_t n, std::uint64_t seed,
                                MixProportions mix = {});

/// Binary dataset file: "A3RLDS1 <json>\n" followed by `count` records of
/// little-endian f32 (s, a, r, s_next, done).
void save_dataset(const OfflineDataset& data, const std::filesystem::path& path);
OfflineDataset load_dataset(const std::filesystem::path& path);

}  // namespace a3rl::env
