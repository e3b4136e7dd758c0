#pragma once

// Straight-line single-sample SAC in float: plain MLPs with their own forward,
// backward and Adam, no ensembles beyond two critics, no priorities. Data
// plumbing (environment, replay draws, random streams) reuses the library so
// both runs see the same transitions and noise.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "a3rl/agent.hpp"
#include "a3rl/replay.hpp"
#include "a3rl/trainer.hpp"

namespace a3rl::testing {

struct RefLayer {
    int in = 0, out = 0;
    std::size_t w = 0, b = 0, g = 0, s = 0;
    bool norm = false;
};

struct RefMlp {
    std::vector<RefLayer> layers;
    std::vector<float> p;
    bool gaussian_head = false;

    RefMlp(const std::vector<int>& widths, bool layer_norm, bool gaussian) : gaussian_head(gaussian) {
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
            RefLayer L;
            L.in = widths[l];
            L.out = widths[l + 1];
            L.w = off;
            off += static_cast<std::size_t>(L.in * L.out);
            L.b = off;
            off += static_cast<std::size_t>(L.out);
            if (layer_norm && l + 2 < widths.size()) {
                L.norm = true;
                L.g = off;
                off += static_cast<std::size_t>(L.out);
                L.s = off;
                off += static_cast<std::size_t>(L.out);
            }
            layers.push_back(L);
        }
        p.assign(off, 0.0f);
    }
};

struct RefCache {
    std::vector<std::vector<float>> in, xhat, pre;
    std::vector<float> inv_std;
    std::vector<float> raw;
};

inline std::vector<float> ref_mlp_forward(const RefMlp& net, const std::vector<float>& x, RefCache* c) {
    const std::size_t nl = net.layers.size();
    if (c) {
        c->in.assign(nl, {});
        c->xhat.assign(nl, {});
        c->pre.assign(nl, {});
        c->inv_std.assign(nl, 0.0f);
    }
    std::vector<float> h = x;
    for (std::size_t l = 0; l < nl; ++l) {
        const RefLayer& L = net.layers[l];
        if (c) c->in[l] = h;
        std::vector<float> z(static_cast<std::size_t>(L.out));
        for (int j = 0; j < L.out; ++j) {
            float acc = net.p[L.b + j];
            for (int i = 0; i < L.in; ++i) acc += h[i] * net.p[L.w + static_cast<std::size_t>(i * L.out + j)];
            z[j] = acc;
        }
        if (l + 1 == nl) {
            if (c) c->raw = z;
            if (net.gaussian_head)
                for (std::size_t k = z.size() / 2; k < z.size(); ++k) z[k] = std::clamp(z[k], -20.0f, 2.0f);
            return z;
        }
        if (L.norm) {
            const float inv_n = 1.0f / static_cast<float>(L.out);
            float mean = 0.0f, var = 0.0f;
            for (float v : z) mean += v;
            mean *= inv_n;
            for (float v : z) var += (v - mean) * (v - mean);
            var *= inv_n;
            const float is = 1.0f / std::sqrt(var + 1e-5f);
            std::vector<float> xh(z.size());
            for (int j = 0; j < L.out; ++j) {
                xh[j] = (z[j] - mean) * is;
                z[j] = net.p[L.g + j] * xh[j] + net.p[L.s + j];
            }
            if (c) {
                c->xhat[l] = xh;
                c->inv_std[l] = is;
            }
        }
        if (c) c->pre[l] = z;
        for (float& v : z) v = std::max(v, 0.0f);
        h = std::move(z);
    }
    return h;
}

/// Accumulates parameter gradients of upstream . output into `g`; returns d/dx.
inline std::vector<float> ref_mlp_backward(const RefMlp& net, const RefCache& c, std::vector<float> dz,
                                           std::vector<float>& g) {
    if (net.gaussian_head)
        for (std::size_t k = dz.size() / 2; k < dz.size(); ++k)
            if (!(c.raw[k] > -20.0f && c.raw[k] < 2.0f)) dz[k] = 0.0f;
    for (std::size_t l = net.layers.size(); l-- > 0;) {
        const RefLayer& L = net.layers[l];
        const auto& x = c.in[l];
        for (int i = 0; i < L.in; ++i)
            for (int j = 0; j < L.out; ++j) g[L.w + static_cast<std::size_t>(i * L.out + j)] += x[i] * dz[j];
        for (int j = 0; j < L.out; ++j) g[L.b + j] += dz[j];
        std::vector<float> dx(static_cast<std::size_t>(L.in), 0.0f);
        for (int i = 0; i < L.in; ++i)
            for (int j = 0; j < L.out; ++j) dx[i] += dz[j] * net.p[L.w + static_cast<std::size_t>(i * L.out + j)];
        if (l == 0) return dx;

        const RefLayer& P = net.layers[l - 1];
        for (int i = 0; i < L.in; ++i)
            if (!(c.pre[l - 1][i] > 0.0f)) dx[i] = 0.0f;
        if (!P.norm) {
            dz = std::move(dx);
            continue;
        }
        const auto& xh = c.xhat[l - 1];
        const float inv_n = 1.0f / static_cast<float>(P.out);
        std::vector<float> dxh(static_cast<std::size_t>(P.out));
        float m1 = 0.0f, m2 = 0.0f;
        for (int j = 0; j < P.out; ++j) {
            dxh[j] = dx[j] * net.p[P.g + j];
            g[P.g + j] += dx[j] * xh[j];
            g[P.s + j] += dx[j];
            m1 += dxh[j];
            m2 += dxh[j] * xh[j];
        }
        m1 *= inv_n;
        m2 *= inv_n;
        dz.assign(static_cast<std::size_t>(P.out), 0.0f);
        for (int j = 0; j < P.out; ++j) dz[j] = c.inv_std[l - 1] * (dxh[j] - m1 - xh[j] * m2);
    }
    return {};
}

struct RefAdam {
    std::vector<float> m, v;
    long t = 0;
    float lr = 3e-4f;

    void step(std::vector<float>& p, const std::vector<float>& g) {
        if (m.empty()) m.assign(p.size(), 0.0f), v.assign(p.size(), 0.0f);
        ++t;
        const float c1 = static_cast<float>(1.0 - std::pow(static_cast<double>(0.9f), static_cast<double>(t)));
        const float c2 = static_cast<float>(1.0 - std::pow(static_cast<double>(0.999f), static_cast<double>(t)));
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = 0.9f * m[k] + (1.0f - 0.9f) * g[k];
            v[k] = 0.999f * v[k] + (1.0f - 0.999f) * g[k] * g[k];
            p[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + 1e-8f);
        }
    }
};

struct RefSample {
    std::vector<float> a;
    float log_pi = 0.0f;
    std::vector<float> head;
};

inline RefSample ref_squash(const std::vector<float>& head, std::span<const float> z) {
    const std::size_t d = head.size() / 2;
    RefSample s{std::vector<float>(d), 0.0f, head};
    for (std::size_t k = 0; k < d; ++k) {
        const float a = std::tanh(head[k] + std::exp(head[d + k]) * z[k]);
        s.a[k] = a;
        s.log_pi += -0.5f * z[k] * z[k] - head[d + k] - 0.918938533204672742f - std::log(1.0f - a * a + 1e-6f);
    }
    return s;
}

struct RefSac {
    RefMlp q0, q1, t0, t1, pi;
    RefAdam o0, o1, opi;
};

inline RefMlp copy_net(const nn::DenseNet& net, bool gaussian) {
    RefMlp m(net.spec().widths, net.spec().layer_norm, gaussian);
    m.p.assign(net.params().begin(), net.params().end());
    return m;
}

inline std::vector<float> concat(std::span<const float> a, std::span<const float> b) {
    std::vector<float> out(a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

/// Replays trainer::train for a UNIFORM, purely online, E = Z = 2, G = 1
/// configuration. Returns the final networks.
inline RefSac run_reference_sac(const trainer::ExperimentConfig& cfg) {
    const env::EnvSpec spec = env::make_env(cfg.env);
    const Rng master(cfg.seed);
    Rng env_rng = master.split(trainer::kEnvStream);
    Rng act_rng = master.split(trainer::kActStream);
    Rng pool_rng = master.split(trainer::kPoolStream);
    Rng batch_rng = master.split(trainer::kBatchStream);
    Rng noise_rng = master.split(trainer::kNoiseStream);

    // Initial weights come from the library initializer; everything after is ours.
    const agent::Agent init(trainer::make_agent_config(cfg, spec), master.split(trainer::kInitStream).next_u64());
    RefSac sac{copy_net(init.critics[0], false), copy_net(init.critics[1], false), copy_net(init.critics[0], false),
               copy_net(init.critics[1], false), copy_net(init.actor, true), {}, {}, {}};
    for (RefAdam* o : {&sac.o0, &sac.o1, &sac.opi}) o->lr = static_cast<float>(cfg.lr);

    const float gamma = static_cast<float>(cfg.gamma);
    const float alpha = static_cast<float>(cfg.alpha);
    const float tau = static_cast<float>(cfg.tau_ema);
    const auto n = static_cast<std::size_t>(cfg.batch_size);
    const auto ad = static_cast<std::size_t>(spec.action_dim);

    replay::OnlineBuffer buffer(static_cast<std::size_t>(cfg.total_steps), spec.state_dim, spec.action_dim);
    const replay::PrioritySet flat = replay::make_priority_set(std::vector<double>(n, 1.0), cfg.rho);

    env::State s = env::reset(spec, env_rng);
    int ep_t = 0;
    for (std::int64_t t = 0; t < cfg.total_steps; ++t) {
        std::vector<float> a(ad);
        if (t < cfg.warmup_steps) {
            for (float& x : a) x = static_cast<float>(act_rng.uniform(-1.0, 1.0));
        } else {
            std::vector<float> z(ad);
            for (float& v : z) v = static_cast<float>(act_rng.normal());
            a = ref_squash(ref_mlp_forward(sac.pi, s, nullptr), z).a;
        }
        auto res = env::step(spec, s, a);
        buffer.push({s, a, res.reward, res.next_state, res.done, env::Source::Online});
        ++ep_t;
        if (res.done || ep_t >= spec.horizon) {
            s = env::reset(spec, env_rng);
            ep_t = 0;
        } else {
            s = std::move(res.next_state);
        }
        if (t < cfg.warmup_steps) continue;

        const CandidatePool pool = replay::form_pool(buffer, nullptr, n, pool_rng);
        const TransitionBatch batch = pool.rows.gather(replay::sample_batch(flat, n, batch_rng));

        // Soft clipped double-Q target.
        std::vector<float> y(n);
        for (std::size_t r = 0; r < n; ++r) {
            std::vector<float> z(ad);
            for (float& v : z) v = static_cast<float>(noise_rng.normal());
            const std::vector<float> s2(batch.next_states.row(r).begin(), batch.next_states.row(r).end());
            const RefSample nx = ref_squash(ref_mlp_forward(sac.pi, s2, nullptr), z);
            const auto sa = concat(batch.next_states.row(r), nx.a);
            const float qmin = std::min(ref_mlp_forward(sac.t0, sa, nullptr)[0], ref_mlp_forward(sac.t1, sa, nullptr)[0]);
            const float nd = batch.dones[r] ? 0.0f : 1.0f;
            y[r] = batch.rewards[r] + gamma * nd * (qmin - alpha * nx.log_pi);
        }

        // Critics: mean squared TD error.
        const float inv_b = 1.0f / static_cast<float>(n);
        for (auto [q, opt] : {std::pair{&sac.q0, &sac.o0}, std::pair{&sac.q1, &sac.o1}}) {
            std::vector<float> g(q->p.size(), 0.0f);
            for (std::size_t r = 0; r < n; ++r) {
                RefCache c;
                const auto sa = concat(batch.states.row(r), batch.actions.row(r));
                const float diff = y[r] - ref_mlp_forward(*q, sa, &c)[0];
                ref_mlp_backward(*q, c, {-2.0f * 1.0f * diff * inv_b}, g);
            }
            opt->step(q->p, g);
        }
        for (auto [tn, q] : {std::pair{&sac.t0, &sac.q0}, std::pair{&sac.t1, &sac.q1}})
            for (std::size_t k = 0; k < tn->p.size(); ++k) tn->p[k] = tau * tn->p[k] + (1.0f - tau) * q->p[k];

        // Actor: alpha log pi - mean_i Q_i through the reparameterized action.
        std::vector<std::vector<float>> noise(n, std::vector<float>(ad));
        for (auto& row : noise)
            for (float& v : row) v = static_cast<float>(noise_rng.normal());
        std::vector<float> g(sac.pi.p.size(), 0.0f);
        const float q_up = -1.0f / (2.0f * static_cast<float>(n));
        const float alpha_b = alpha / static_cast<float>(n);
        for (std::size_t r = 0; r < n; ++r) {
            const std::vector<float> st(batch.states.row(r).begin(), batch.states.row(r).end());
            RefCache pc;
            const RefSample smp = ref_squash(ref_mlp_forward(sac.pi, st, &pc), noise[r]);
            const auto sa = concat(st, smp.a);
            std::vector<float> d_action(ad, 0.0f);
            for (const RefMlp* q : {&sac.q0, &sac.q1}) {
                RefCache c;
                ref_mlp_forward(*q, sa, &c);
                std::vector<float> scratch(q->p.size(), 0.0f);
                const auto d_in = ref_mlp_backward(*q, c, {q_up}, scratch);
                for (std::size_t k = 0; k < ad; ++k) d_action[k] += d_in[st.size() + k];
            }
            std::vector<float> up(2 * ad);
            for (std::size_t k = 0; k < ad; ++k) {
                const float a = smp.a[k];
                const float om = 1.0f - a * a;
                const float du = (d_action[k] + alpha_b * (2.0f * a / (om + 1e-6f))) * om;
                up[k] = du;
                up[ad + k] = du * std::exp(smp.head[ad + k]) * noise[r][k] - alpha_b;
            }
            ref_mlp_backward(sac.pi, pc, up, g);
        }
        sac.opi.step(sac.pi.p, g);
    }
    return sac;
}

}  // namespace a3rl::testing
