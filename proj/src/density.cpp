#include "a3rl/density.hpp"

#include <cmath>
#include <sstream>

#include "a3rl/error.hpp"
#include "a3rl/log.hpp"
#include "a3rl/sampling.hpp"

namespace a3rl::density {

double f(double y) {
    if (!(y > 0.0)) throw ConfigError("f: argument must be positive");
    return y * std::log(2.0 * y / (y + 1.0)) + std::log(2.0 / (y + 1.0));
}

double f_prime(double y) {
    if (!(y > 0.0)) throw ConfigError("f_prime: argument must be positive");
    return std::log(2.0 * y / (y + 1.0));
}

double f_conj_of_fprime(double w) {
    if (!(w > 0.0)) throw ConfigError("f_conj_of_fprime: argument must be positive");
    return std::log((1.0 + w) / 2.0);
}

nn::NetSpec member_spec(int input_dim, const DensityConfig& config) {
    nn::NetSpec spec;
    spec.widths.push_back(input_dim);
    for (int l = 0; l < config.hidden_layers; ++l) spec.widths.push_back(config.hidden);
    spec.widths.push_back(1);
    spec.layer_norm = config.layer_norm;
    spec.head = nn::HeadKind::Softplus;
    return spec;
}

DensityEnsemble::DensityEnsemble(int input_dim, DensityConfig config, std::uint64_t seed)
    : config_(config), input_dim_(input_dim) {
    if (config_.members < 2) throw ConfigError("density ensemble needs at least two members");
    const Rng root(seed);
    const nn::NetSpec spec = member_spec(input_dim, config_);
    for (int i = 0; i < config_.members; ++i) {
        Rng init = root.split(2 * static_cast<std::uint64_t>(i));
        members_.push_back(nn::DenseNet::initialized(spec, init.next_u64()));
        optimizers_.emplace_back(members_.back().param_count(), config_.adam);
        streams_.push_back(root.split(2 * static_cast<std::uint64_t>(i) + 1));
    }
}

double dr_loss(const nn::DenseNet& member, const nn::Matrix& online, const nn::Matrix& offline,
               nn::GradBuffer* grads) {
    if (online.rows() == 0 || offline.rows() == 0) throw ConfigError("dr_loss: empty online or offline batch");
    nn::Tape tape_on, tape_off;
    const nn::Matrix w_on = member.forward(online, grads ? &tape_on : nullptr);
    const nn::Matrix w_off = member.forward(offline, grads ? &tape_off : nullptr);

    const double n_on = static_cast<double>(online.rows());
    const double n_off = static_cast<double>(offline.rows());
    double bound_on = 0.0;
    double bound_off = 0.0;
    for (float w : w_on.values()) bound_on += f_prime(w);
    for (float w : w_off.values()) bound_off += f_conj_of_fprime(w);
    const double loss = -(bound_on / n_on - bound_off / n_off);
    if (!std::isfinite(loss)) throw NumericalError("dr_loss: non-finite loss");

    if (grads) {
        // d/dw f'(w) = 1 / (w (w + 1));  d/dw log((1 + w) / 2) = 1 / (1 + w)
        nn::Matrix up_on(w_on.rows(), 1);
        for (std::size_t r = 0; r < w_on.rows(); ++r) {
            const double w = w_on(r, 0);
            up_on(r, 0) = static_cast<float>(-1.0 / (n_on * w * (w + 1.0)));
        }
        nn::Matrix up_off(w_off.rows(), 1);
        for (std::size_t r = 0; r < w_off.rows(); ++r) {
            const double w = w_off(r, 0);
            up_off(r, 0) = static_cast<float>(1.0 / (n_off * (1.0 + w)));
        }
        member.backward(tape_on, up_on, *grads);
        member.backward(tape_off, up_off, *grads);
    }
    return loss;
}

namespace {

nn::Matrix rows_of(const nn::Matrix& m, std::span<const std::size_t> idx) {
    nn::Matrix out(0, m.cols());
    out.reserve_rows(idx.size());
    for (std::size_t i : idx) out.append_row(m.row(i));
    return out;
}

}  // namespace

std::optional<double> update_ensemble(DensityEnsemble& ensemble, const CandidatePool& pool) {
    std::vector<std::size_t> online_rows, offline_rows;
    for (std::size_t i = 0; i < pool.size(); ++i)
        (pool.rows.is_offline(i) ? offline_rows : online_rows).push_back(i);
    if (online_rows.empty() || offline_rows.empty()) {
        log::warn("density update skipped: candidate pool holds a single source");
        return std::nullopt;
    }

    const nn::Matrix sa = pool.rows.state_actions();
    const nn::Matrix online = rows_of(sa, online_rows);
    const nn::Matrix offline = rows_of(sa, offline_rows);
    const std::size_t k_on = std::max<std::size_t>(1, online_rows.size() / 2);
    const std::size_t k_off = std::max<std::size_t>(1, offline_rows.size() / 2);

    // Members are independent given their own streams; the result does not
    // depend on the order they are visited in.
    double total = 0.0;
    for (std::size_t m = 0; m < ensemble.size(); ++m) {
        Rng& rng = ensemble.streams()[m];
        const auto pick_on = sample_without_replacement(online.rows(), k_on, rng);
        const auto pick_off = sample_without_replacement(offline.rows(), k_off, rng);
        auto& net = ensemble.members()[m];
        nn::GradBuffer grads = net.zero_grads();
        total += dr_loss(net, rows_of(online, pick_on), rows_of(offline, pick_off), &grads);
        nn::adam_step(net.params(), grads, ensemble.optimizers()[m]);
    }
    return total / static_cast<double>(ensemble.size());
}

RatioEstimate aggregate(std::span<const double> member_outputs, double c_w, double eps_w, bool sample_std) {
    const auto n = static_cast<double>(member_outputs.size());
    RatioEstimate est;
    for (double w : member_outputs) est.mean += w;
    est.mean /= n;
    double ss = 0.0;
    for (double w : member_outputs) ss += (w - est.mean) * (w - est.mean);
    const double denom = sample_std && member_outputs.size() > 1 ? n - 1.0 : n;
    est.uncertainty = std::sqrt(ss / denom);
    est.lcb = std::max(est.mean - c_w * est.uncertainty, eps_w);
    return est;
}

std::vector<RatioEstimate> predict_lcb(const DensityEnsemble& ensemble, const nn::Matrix& state_actions) {
    std::vector<nn::Matrix> outputs;
    outputs.reserve(ensemble.size());
    for (const auto& member : ensemble.members()) outputs.push_back(member.forward(state_actions));
    const auto& cfg = ensemble.config();
    std::vector<RatioEstimate> out(state_actions.rows());
    std::vector<double> column(ensemble.size());
    for (std::size_t r = 0; r < state_actions.rows(); ++r) {
        for (std::size_t m = 0; m < ensemble.size(); ++m) column[m] = outputs[m](r, 0);
        out[r] = aggregate(column, cfg.c_w, cfg.eps_w, cfg.sample_std);
    }
    return out;
}

RatioEstimate predict_lcb(const DensityEnsemble& ensemble, std::span<const float> s, std::span<const float> a) {
    std::vector<float> row(s.begin(), s.end());
    row.insert(row.end(), a.begin(), a.end());
    return predict_lcb(ensemble, nn::Matrix::from_row(row)).front();
}

}  // namespace a3rl::density
