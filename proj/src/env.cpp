#include "a3rl/env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include "json.hpp"
#include <sstream>

#include "a3rl/error.hpp"
#include "binary_io.hpp"

namespace a3rl::env {

namespace {

constexpr const char* kDatasetMagic = "A3RLDS1";

float clip_unit(float a) { return std::clamp(a, -1.0f, 1.0f); }

void check_finite(std::span<const float> v, const char* what) {
    if (!nn::all_finite(v)) throw NumericalError(std::string("step: non-finite ") + what);
}

float goal_distance(const EnvSpec& spec, float x, float y) {
    const float dx = x - spec.goal[0];
    const float dy = y - spec.goal[1];
    return std::sqrt(dx * dx + dy * dy);
}

// Route around the two maze walls, chosen from the current region so the
// controller stays a function of the state alone.
std::array<float, 2> maze_waypoint(const EnvSpec& spec, float x, float y) {
    if (x < 1.5f) return y < 3.0f ? std::array<float, 2>{0.75f, 3.3f} : std::array<float, 2>{2.0f, 3.3f};
    if (x < 2.5f) return y > 1.0f ? std::array<float, 2>{2.0f, 0.7f} : std::array<float, 2>{3.3f, 0.7f};
    return spec.goal;
}

}  // namespace

EnvSpec point_reach() {
    EnvSpec spec;
    spec.name = "PointReach";
    spec.kind = EnvKind::PointReach;
    spec.horizon = 200;
    spec.reward = RewardKind::Dense;
    spec.goal = {2.0f, 2.0f};
    spec.goal_radius = 0.1f;
    return spec;
}

EnvSpec point_maze() {
    EnvSpec spec;
    spec.name = "PointMaze";
    spec.kind = EnvKind::PointMaze;
    spec.horizon = 300;
    spec.reward = RewardKind::Sparse;
    spec.goal = {3.5f, 3.5f};
    spec.goal_radius = 0.15f;
    spec.arena_lo = 0.0f;
    spec.arena_hi = 4.0f;
    spec.walls = {{1.5f, 0.0f, 1.5f, 2.5f}, {2.5f, 1.5f, 2.5f, 4.0f}};
    return spec;
}

EnvSpec bandit_env(int num_arms, std::vector<double> rewards) {
    if (num_arms < 2) throw ConfigError("bandit_env: need at least two arms");
    if (static_cast<int>(rewards.size()) != num_arms) throw ConfigError("bandit_env: reward vector length != K");
    for (double r : rewards)
        if (!std::isfinite(r)) throw ConfigError("bandit_env: rewards must be finite");
    EnvSpec spec;
    spec.name = "Bandit";
    spec.kind = EnvKind::Bandit;
    spec.state_dim = 1;
    spec.action_dim = 1;
    spec.horizon = 1;
    spec.reward = RewardKind::Dense;
    spec.start_noise = 0.0f;
    spec.arm_rewards = std::move(rewards);
    return spec;
}

std::vector<std::string> env_names() { return {"PointReach", "PointMaze"}; }

EnvSpec make_env(const std::string& name) {
    if (name == "PointReach") return point_reach();
    if (name == "PointMaze") return point_maze();
    throw ConfigError("unknown env '" + name + "' (valid: PointReach, PointMaze)");
}

State reset(const EnvSpec& spec, Rng& rng) {
    if (spec.kind == EnvKind::Bandit) return State{0.0f};
    State s(4, 0.0f);
    for (auto& x : s) x = static_cast<float>(rng.uniform(-spec.start_noise, spec.start_noise));
    return s;
}

State reset(const EnvSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    return reset(spec, rng);
}

bool in_wall(const EnvSpec& spec, float x, float y) {
    const float hw = spec.wall_half_width;
    for (const auto& w : spec.walls) {
        const float xlo = std::min(w.x0, w.x1) - hw;
        const float xhi = std::max(w.x0, w.x1) + hw;
        const float ylo = std::min(w.y0, w.y1) - hw;
        const float yhi = std::max(w.y0, w.y1) + hw;
        if (x >= xlo && x <= xhi && y >= ylo && y <= yhi) return true;
    }
    return false;
}

bool at_goal(const EnvSpec& spec, std::span<const float> state) {
    if (spec.kind == EnvKind::Bandit) return false;
    return goal_distance(spec, state[0], state[1]) <= spec.goal_radius;
}

StepResult step(const EnvSpec& spec, std::span<const float> state, std::span<const float> action) {
    if (static_cast<int>(state.size()) != spec.state_dim) throw DimensionError("step: state dimension mismatch");
    if (static_cast<int>(action.size()) != spec.action_dim) throw DimensionError("step: action dimension mismatch");
    check_finite(state, "state");
    check_finite(action, "action");

    StepResult out;
    if (spec.kind == EnvKind::Bandit) {
        const int k = static_cast<int>(spec.arm_rewards.size());
        const int arm = std::clamp(static_cast<int>(std::lround(action[0])), 0, k - 1);
        out.next_state = State{0.0f};
        out.reward = static_cast<float>(spec.arm_rewards[static_cast<std::size_t>(arm)]);
        out.done = true;
        return out;
    }

    const float px = state[0], py = state[1], vx = state[2], vy = state[3];
    const float ax = clip_unit(action[0]);
    const float ay = clip_unit(action[1]);
    float nx = px + spec.dt * vx;
    float ny = py + spec.dt * vy;
    float nvx = (1.0f - spec.damping) * vx + spec.dt * ax;
    float nvy = (1.0f - spec.damping) * vy + spec.dt * ay;

    if (spec.kind == EnvKind::PointMaze) {
        // Resolve one axis at a time: a blocked axis keeps its old coordinate
        // and loses its velocity, so the mass slides along walls.
        if (nx < spec.arena_lo || nx > spec.arena_hi) {
            nx = std::clamp(nx, spec.arena_lo, spec.arena_hi);
            nvx = 0.0f;
        }
        if (in_wall(spec, nx, py)) {
            nx = px;
            nvx = 0.0f;
        }
        if (ny < spec.arena_lo || ny > spec.arena_hi) {
            ny = std::clamp(ny, spec.arena_lo, spec.arena_hi);
            nvy = 0.0f;
        }
        if (in_wall(spec, nx, ny)) {
            ny = py;
            nvy = 0.0f;
        }
    }

    out.next_state = State{nx, ny, nvx, nvy};
    const float dist = goal_distance(spec, nx, ny);
    out.done = dist <= spec.goal_radius;
    if (spec.reward == RewardKind::Dense)
        out.reward = -dist;
    else
        out.reward = out.done ? 1.0f : 0.0f;
    return out;
}

// ---------------------------------------------------------------------------

std::string to_string(BehaviorPolicy p) {
    switch (p) {
        case BehaviorPolicy::Random: return "random";
        case BehaviorPolicy::Medium: return "medium";
        case BehaviorPolicy::Expert: return "expert";
        case BehaviorPolicy::Mix: return "mix";
    }
    return "random";
}

std::vector<std::string> policy_names() { return {"random", "medium", "expert", "mix"}; }

BehaviorPolicy policy_from_string(const std::string& name) {
    if (name == "random") return BehaviorPolicy::Random;
    if (name == "medium") return BehaviorPolicy::Medium;
    if (name == "expert") return BehaviorPolicy::Expert;
    if (name == "mix") return BehaviorPolicy::Mix;
    throw ConfigError("unknown policy '" + name + "' (valid: random, medium, expert, mix)");
}

Transition OfflineDataset::at(std::size_t i) const {
    Transition t;
    t.s.assign(states.row(i).begin(), states.row(i).end());
    t.a.assign(actions.row(i).begin(), actions.row(i).end());
    t.r = rewards[i];
    t.s_next.assign(next_states.row(i).begin(), next_states.row(i).end());
    t.done = dones[i] != 0;
    t.source = Source::Offline;
    return t;
}

void OfflineDataset::reserve(std::size_t n) {
    states.reserve_rows(n);
    actions.reserve_rows(n);
    next_states.reserve_rows(n);
    rewards.reserve(n);
    dones.reserve(n);
}

void OfflineDataset::append(const Transition& t) {
    if (static_cast<int>(t.s.size()) != state_dim || static_cast<int>(t.s_next.size()) != state_dim ||
        static_cast<int>(t.a.size()) != action_dim)
        throw DimensionError("OfflineDataset::append: transition dims do not match the dataset");
    if (!std::isfinite(t.r)) throw NumericalError("OfflineDataset::append: non-finite reward");
    states.append_row(t.s);
    actions.append_row(t.a);
    next_states.append_row(t.s_next);
    rewards.push_back(t.r);
    dones.push_back(t.done ? 1 : 0);
}

Action expert_action(const EnvSpec& spec, std::span<const float> state) {
    if (spec.kind == EnvKind::Bandit) {
        const auto best = std::max_element(spec.arm_rewards.begin(), spec.arm_rewards.end());
        return Action{static_cast<float>(best - spec.arm_rewards.begin())};
    }
    const auto target = spec.kind == EnvKind::PointMaze ? maze_waypoint(spec, state[0], state[1]) : spec.goal;
    Action a(2);
    for (int d = 0; d < 2; ++d)
        a[static_cast<std::size_t>(d)] =
            clip_unit(1.5f * (target[static_cast<std::size_t>(d)] - state[static_cast<std::size_t>(d)]) -
                      0.8f * state[static_cast<std::size_t>(d) + 2]);
    return a;
}

namespace {

Action random_action(const EnvSpec& spec, Rng& rng) {
    if (spec.kind == EnvKind::Bandit)
        return Action{static_cast<float>(rng.below(spec.arm_rewards.size()))};
    Action a(static_cast<std::size_t>(spec.action_dim));
    for (auto& x : a) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    return a;
}

}  // namespace

Action behavior_action(const EnvSpec& spec, BehaviorPolicy policy, std::span<const float> state, Rng& rng) {
    switch (policy) {
        case BehaviorPolicy::Random: return random_action(spec, rng);
        case BehaviorPolicy::Expert: return expert_action(spec, state);
        case BehaviorPolicy::Medium: {
            if (rng.uniform01() < 0.3) return random_action(spec, rng);
            Action a = expert_action(spec, state);
            if (spec.kind == EnvKind::Bandit) return a;
            for (auto& x : a) x = clip_unit(x + static_cast<float>(rng.uniform(-0.5, 0.5)));
            return a;
        }
        case BehaviorPolicy::Mix: break;
    }
    throw ConfigError("behavior_action: 'mix' is a dataset composition, not a per-step policy");
}

namespace {

void rollout_into(const EnvSpec& spec, BehaviorPolicy policy, std::size_t n, Rng& rng, OfflineDataset& data) {
    std::size_t recorded = 0;
    while (recorded < n) {
        State s = reset(spec, rng);
        for (int t = 0; t < spec.horizon && recorded < n; ++t) {
            Action a = behavior_action(spec, policy, s, rng);
            if (spec.kind != EnvKind::Bandit)
                for (auto& x : a) x = clip_unit(x);
            StepResult res = step(spec, s, a);
            data.append(Transition{s, a, res.reward, res.next_state, res.done, Source::Offline});
            ++recorded;
            if (res.done) break;
            s = std::move(res.next_state);
        }
    }
}

}  // namespace

OfflineDataset generate_offline(const EnvSpec& spec, BehaviorPolicy policy, std::size_t n, std::uint64_t seed,
                                MixProportions mix) {
    if (n < 1) throw ConfigError("generate_offline: n must be at least 1");
    OfflineDataset data;
    data.env_name = spec.name;
    data.state_dim = spec.state_dim;
    data.action_dim = spec.action_dim;
    data.policy = to_string(policy);
    data.seed = seed;
    data.states = nn::Matrix(0, static_cast<std::size_t>(spec.state_dim));
    data.actions = nn::Matrix(0, static_cast<std::size_t>(spec.action_dim));
    data.next_states = nn::Matrix(0, static_cast<std::size_t>(spec.state_dim));
    data.reserve(n);

    Rng rng(seed);
    if (policy != BehaviorPolicy::Mix) {
        rollout_into(spec, policy, n, rng, data);
        return data;
    }
    const double total = mix.random + mix.medium + mix.expert;
    if (!(total > 0.0) || mix.random < 0.0 || mix.medium < 0.0 || mix.expert < 0.0)
        throw ConfigError("generate_offline: mix proportions must be non-negative with a positive sum");
    const auto n_random = static_cast<std::size_t>(std::floor(static_cast<double>(n) * mix.random / total));
    const auto n_medium = static_cast<std::size_t>(std::floor(static_cast<double>(n) * mix.medium / total));
    const std::size_t n_expert = n - n_random - n_medium;
    if (n_random > 0) rollout_into(spec, BehaviorPolicy::Random, n_random, rng, data);
    if (n_medium > 0) rollout_into(spec, BehaviorPolicy::Medium, n_medium, rng, data);
    if (n_expert > 0) rollout_into(spec, BehaviorPolicy::Expert, n_expert, rng, data);
    return data;
}

void save_dataset(const OfflineDataset& data, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    nlohmann::json header = {{"env", data.env_name},
                             {"state_dim", data.state_dim},
                             {"action_dim", data.action_dim},
                             {"count", data.size()},
                             {"policy", data.policy},
                             {"seed", data.seed}};
    out << kDatasetMagic << ' ' << header.dump() << '\n';
    std::vector<float> record;
    for (std::size_t i = 0; i < data.size(); ++i) {
        record.clear();
        record.insert(record.end(), data.states.row(i).begin(), data.states.row(i).end());
        record.insert(record.end(), data.actions.row(i).begin(), data.actions.row(i).end());
        record.push_back(data.rewards[i]);
        record.insert(record.end(), data.next_states.row(i).begin(), data.next_states.row(i).end());
        record.push_back(data.dones[i] ? 1.0f : 0.0f);
        detail::write_f32_le(out, record);
    }
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

OfflineDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty dataset file '" + path.string() + "'");
    const std::string magic = std::string(kDatasetMagic) + ' ';
    if (line.rfind(magic, 0) != 0) throw IoError("'" + path.string() + "' is not an A3RLDS1 dataset");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line.substr(magic.size()));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("bad dataset header: ") + e.what());
    }
    OfflineDataset data;
    try {
        data.env_name = header.at("env").get<std::string>();
        data.state_dim = header.at("state_dim").get<int>();
        data.action_dim = header.at("action_dim").get<int>();
        data.policy = header.at("policy").get<std::string>();
        data.seed = header.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("bad dataset header: ") + e.what());
    }
    const auto count = header.at("count").get<std::size_t>();
    if (data.state_dim < 1 || data.action_dim < 1) throw IoError("bad dataset header: non-positive dims");

    const auto sd = static_cast<std::size_t>(data.state_dim);
    const auto ad = static_cast<std::size_t>(data.action_dim);
    data.states = nn::Matrix(count, sd);
    data.actions = nn::Matrix(count, ad);
    data.next_states = nn::Matrix(count, sd);
    data.rewards.resize(count);
    data.dones.resize(count);
    std::vector<float> record(2 * sd + ad + 2);
    for (std::size_t i = 0; i < count; ++i) {
        detail::read_f32_le(in, record);
        auto it = record.begin();
        std::copy_n(it, sd, data.states.row(i).begin());
        it += static_cast<std::ptrdiff_t>(sd);
        std::copy_n(it, ad, data.actions.row(i).begin());
        it += static_cast<std::ptrdiff_t>(ad);
        data.rewards[i] = *it++;
        std::copy_n(it, sd, data.next_states.row(i).begin());
        it += static_cast<std::ptrdiff_t>(sd);
        data.dones[i] = *it != 0.0f ? 1 : 0;
        if (!std::isfinite(data.rewards[i])) throw IoError("dataset contains a non-finite reward");
    }
    if (in.peek() != std::char_traits<char>::eof()) throw IoError("dataset has trailing bytes beyond count");
    return data;
}

}  // namespace a3rl::env
