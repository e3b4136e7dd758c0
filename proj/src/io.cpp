#include "a3rl/io.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "a3rl/error.hpp"
#include "binary_io.hpp"
#include "json.hpp"

namespace a3rl::io {

using nlohmann::json;
using trainer::ExperimentConfig;

namespace {

constexpr const char* kCheckpointMagic = "A3RLCK1\n";
constexpr std::size_t kMagicLen = 8;

// One config key: how to write it and how to read it back.
struct Field {
    const char* key;
    std::function<json(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const json&)> set;
};

template <class T>
Field plain(const char* key, T ExperimentConfig::*member) {
    return {key, [member](const ExperimentConfig& c) { return json(c.*member); },
            [member](ExperimentConfig& c, const json& v) {
                if constexpr (std::is_same_v<T, bool>) {
                    if (!v.is_boolean()) throw ConfigError("expected a boolean");
                } else if constexpr (std::is_same_v<T, std::string>) {
                    if (!v.is_string()) throw ConfigError("expected a string");
                } else if constexpr (std::is_floating_point_v<T>) {
                    if (!v.is_number()) throw ConfigError("expected a number");
                } else {
                    if (!v.is_number_integer()) throw ConfigError("expected an integer");
                    if constexpr (std::is_unsigned_v<T>)
                        if (v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError("expected a non-negative integer");
                }
                c.*member = v.get<T>();
            }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> f{
            plain("env", &ExperimentConfig::env),
            plain("offline_path", &ExperimentConfig::offline_path),
            {"mode", [](const ExperimentConfig& c) { return json(replay::to_string(c.mode)); },
             [](ExperimentConfig& c, const json& v) {
                 if (!v.is_string()) throw ConfigError("expected a string");
                 c.mode = replay::mode_from_string(v.get<std::string>());
             }},
            plain("batch_size", &ExperimentConfig::batch_size),
            plain("gradient_steps", &ExperimentConfig::gradient_steps),
            plain("ensemble_size", &ExperimentConfig::ensemble_size),
            plain("target_subset", &ExperimentConfig::target_subset),
            plain("hidden", &ExperimentConfig::hidden),
            plain("hidden_layers", &ExperimentConfig::hidden_layers),
            plain("gamma", &ExperimentConfig::gamma),
            plain("alpha", &ExperimentConfig::alpha),
            plain("tau_ema", &ExperimentConfig::tau_ema),
            plain("xi", &ExperimentConfig::xi),
            plain("rho", &ExperimentConfig::rho),
            plain("beta0", &ExperimentConfig::beta0),
            plain("c_w", &ExperimentConfig::c_w),
            plain("c_adv", &ExperimentConfig::c_adv),
            plain("mc_samples", &ExperimentConfig::mc_samples),
            plain("density_members", &ExperimentConfig::density_members),
            plain("density_hidden", &ExperimentConfig::density_hidden),
            plain("lr", &ExperimentConfig::lr),
            plain("total_steps", &ExperimentConfig::total_steps),
            plain("warmup_steps", &ExperimentConfig::warmup_steps),
            plain("eval_interval", &ExperimentConfig::eval_interval),
            plain("eval_episodes", &ExperimentConfig::eval_episodes),
            plain("seed", &ExperimentConfig::seed),
            plain("entropy_sign_plus", &ExperimentConfig::entropy_sign_plus),
            plain("auto_alpha", &ExperimentConfig::auto_alpha),
            plain("actor_fresh_batch", &ExperimentConfig::actor_fresh_batch),
            plain("record_timing", &ExperimentConfig::record_timing),
        };
        return f;
    }();
    return table;
}

json config_json(const ExperimentConfig& config) {
    json j = json::object();
    for (const auto& f : fields()) j[f.key] = f.get(config);
    return j;
}

json net_spec_json(const nn::NetSpec& spec) {
    return {{"widths", spec.widths}, {"layer_norm", spec.layer_norm}, {"head", nn::to_string(spec.head)}};
}

}  // namespace

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& f : fields()) keys.emplace_back(f.key);
    return keys;
}

std::string config_to_json(const ExperimentConfig& config) { return config_json(config).dump(2) + "\n"; }

ExperimentConfig config_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");

    ExperimentConfig config;
    std::vector<std::string> problems;
    for (const auto& [key, value] : doc.items()) {
        const Field* field = nullptr;
        for (const auto& f : fields())
            if (key == f.key) field = &f;
        if (field == nullptr) {
            problems.push_back(key + ": unknown key");
            continue;
        }
        try {
            field->set(config, value);
        } catch (const std::exception& e) {
            problems.push_back(key + ": " + e.what());
        }
    }
    if (problems.empty())
        for (auto& p : trainer::validate(config)) problems.push_back(std::move(p));
    if (!problems.empty()) {
        std::string msg = "invalid config:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ConfigError(msg);
    }
    return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config '" + path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return config_from_json(text.str());
}

std::string config_hash(const ExperimentConfig& config) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(detail::fnv1a(config_json(config).dump())));
    return buf;
}

// ---------------------------------------------------------------------------
// Checkpoints

Checkpoint make_checkpoint(const agent::Agent& agent, const std::string& hash, std::int64_t env_step) {
    Checkpoint ck;
    ck.config_hash = hash;
    ck.env_step = env_step;
    auto add = [&](std::string name, const nn::DenseNet& net) {
        ck.blocks.push_back({std::move(name), net.spec(), {net.params().begin(), net.params().end()}});
    };
    for (std::size_t i = 0; i < agent.critics.size(); ++i) add("critic" + std::to_string(i), agent.critics[i]);
    for (std::size_t i = 0; i < agent.targets.size(); ++i) add("target" + std::to_string(i), agent.targets[i]);
    add("actor", agent.actor);
    ck.blocks.push_back({"log_alpha", nn::NetSpec{{1, 1}, false, nn::HeadKind::Linear}, {agent.log_alpha}});
    return ck;
}

void restore(const Checkpoint& ck, agent::Agent& agent) {
    auto fill = [](const ParamBlock& b, nn::DenseNet& net) {
        if (b.spec != net.spec() || b.values.size() != net.param_count())
            throw DimensionError("checkpoint block '" + b.name + "' does not match the agent's network");
        std::copy(b.values.begin(), b.values.end(), net.params().begin());
    };
    const std::size_t e = agent.critics.size();
    if (ck.blocks.size() != 2 * e + 2) throw DimensionError("checkpoint holds a different number of networks");
    for (std::size_t i = 0; i < e; ++i) {
        fill(ck.blocks[i], agent.critics[i]);
        fill(ck.blocks[e + i], agent.targets[i]);
    }
    fill(ck.blocks[2 * e], agent.actor);
    const auto& la = ck.blocks[2 * e + 1];
    if (la.values.size() != 1) throw DimensionError("checkpoint block 'log_alpha' must hold one value");
    agent.log_alpha = la.values[0];
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    json header = {{"module", ck.module}, {"config_hash", ck.config_hash}, {"env_step", ck.env_step}};
    json blocks = json::array();
    for (const auto& b : ck.blocks) {
        json jb = net_spec_json(b.spec);
        jb["name"] = b.name;
        jb["count"] = b.values.size();
        blocks.push_back(std::move(jb));
    }
    header["blocks"] = std::move(blocks);
    const std::string text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(kCheckpointMagic, kMagicLen);
    const auto len = static_cast<std::uint32_t>(text.size());
    const char len_bytes[4] = {static_cast<char>(len & 0xFF), static_cast<char>((len >> 8) & 0xFF),
                               static_cast<char>((len >> 16) & 0xFF), static_cast<char>((len >> 24) & 0xFF)};
    out.write(len_bytes, 4);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& b : ck.blocks) detail::write_f32_le(out, b.values);
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint '" + path.string() + "'");
    char magic[kMagicLen];
    if (!in.read(magic, kMagicLen) || std::string(magic, kMagicLen) != kCheckpointMagic)
        throw IoError("'" + path.string() + "' is not an A3RLCK1 checkpoint");
    unsigned char lb[4];
    if (!in.read(reinterpret_cast<char*>(lb), 4)) throw IoError("truncated checkpoint header");
    const std::uint32_t len = lb[0] | (lb[1] << 8) | (lb[2] << 16) | (static_cast<std::uint32_t>(lb[3]) << 24);
    std::string text(len, '\0');
    if (!in.read(text.data(), len)) throw IoError("truncated checkpoint header");

    Checkpoint ck;
    try {
        const json header = json::parse(text);
        ck.module = header.at("module").get<std::string>();
        ck.config_hash = header.at("config_hash").get<std::string>();
        ck.env_step = header.at("env_step").get<std::int64_t>();
        for (const auto& jb : header.at("blocks")) {
            ParamBlock b;
            b.name = jb.at("name").get<std::string>();
            b.spec.widths = jb.at("widths").get<std::vector<int>>();
            b.spec.layer_norm = jb.at("layer_norm").get<bool>();
            b.spec.head = nn::head_from_string(jb.at("head").get<std::string>());
            b.values.resize(jb.at("count").get<std::size_t>());
            ck.blocks.push_back(std::move(b));
        }
    } catch (const json::exception& e) {
        throw IoError(std::string("bad checkpoint header: ") + e.what());
    }
    for (auto& b : ck.blocks) detail::read_f32_le(in, b.values);
    if (in.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes after checkpoint blocks");
    return ck;
}

}  // namespace a3rl::io
