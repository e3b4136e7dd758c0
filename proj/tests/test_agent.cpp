#include "doctest.h"

#include <cmath>
#include <set>

#include "a3rl/agent.hpp"
#include "a3rl/error.hpp"
#include "reference.hpp"
#include "support.hpp"

using namespace a3rl;
using namespace a3rl::agent;

namespace {

AgentConfig tiny_config() {
    AgentConfig c;
    c.state_dim = 2;
    c.action_dim = 1;
    c.hidden = 4;
    c.hidden_layers = 1;
    c.ensemble_size = 3;
    c.mc_samples = 4;
    return c;
}

// Parameters off their initial values so no ReLU sits exactly on its kink.
Agent jittered_agent(const AgentConfig& c, std::uint64_t seed) {
    Agent ag(c, seed);
    Rng rng(seed + 50);
    for (auto& net : ag.critics)
        for (float& v : net.params()) v += 0.1f * static_cast<float>(rng.normal());
    for (float& v : ag.actor.params()) v += 0.1f * static_cast<float>(rng.normal());
    ag.targets = ag.critics;
    return ag;
}

TransitionBatch random_batch(std::size_t n, const AgentConfig& c, Rng& rng) {
    TransitionBatch b(c.state_dim, c.action_dim);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<float> s(c.state_dim), a(c.action_dim), s2(c.state_dim);
        for (auto& v : s) v = static_cast<float>(rng.normal());
        for (auto& v : a) v = static_cast<float>(rng.uniform(-0.9, 0.9));
        for (auto& v : s2) v = static_cast<float>(rng.normal());
        b.append(s, a, static_cast<float>(rng.normal()), s2, i % 3 == 0, env::Source::Online);
    }
    return b;
}

}  // namespace

TEST_CASE("construction") {
    const Agent ag(tiny_config(), 1);
    CHECK(ag.critics.size() == 3);
    CHECK(ag.targets.size() == 3);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(std::equal(ag.critics[i].params().begin(), ag.critics[i].params().end(), ag.targets[i].params().begin()));
    CHECK(ag.critics[0].params()[0] != ag.critics[1].params()[0]);
    CHECK(ag.critics[0].spec().layer_norm);
    CHECK(critic_spec(tiny_config()).param_count() <= 64);
    CHECK(actor_spec(tiny_config()).param_count() <= 64);

    AgentConfig bad = tiny_config();
    bad.target_subset = 3;
    CHECK_THROWS_AS(Agent(bad, 1), ConfigError);
    bad = tiny_config();
    bad.ensemble_size = 1;
    CHECK_THROWS_AS(Agent(bad, 1), ConfigError);
}

TEST_CASE("sampled log-probability equals the closed-form squashed density") {
    const Agent ag = jittered_agent(tiny_config(), 2);
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        const float s[] = {static_cast<float>(rng.normal()), static_cast<float>(rng.normal())};
        const auto sample = sample_action(ag.actor, s, rng);
        const auto head = nn::forward(ag.actor, s);
        const double lp = squashed_log_density(std::span(head).first(1), std::span(head).last(1), sample.action);
        CHECK(sample.log_pi == doctest::Approx(lp).epsilon(1e-4));
        CHECK(std::abs(sample.action[0]) < 1.0f);
    }
}

TEST_CASE("squashed density integrates to one") {
    const float mean[] = {0.3f}, log_std[] = {-0.5f};
    const int n = 200000;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const float a[] = {static_cast<float>(-1.0 + (i + 0.5) * 2.0 / n)};
        total += std::exp(squashed_log_density(mean, log_std, a)) * 2.0 / n;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("mean action is tanh of the mean head") {
    const Agent ag = jittered_agent(tiny_config(), 4);
    const float s[] = {0.2f, -0.4f};
    const auto head = nn::forward(ag.actor, s);
    CHECK(mean_action(ag.actor, s)[0] == doctest::Approx(std::tanh(head[0])));
}

TEST_CASE("target subsets hold distinct members") {
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        const auto z = draw_target_subset(10, 2, rng);
        REQUIRE(z.size() == 2);
        CHECK(z[0] != z[1]);
        for (int i : z) CHECK((i >= 0 && i < 10));
    }
}

TEST_CASE("cdq target against a double-precision recomputation") {
    for (bool plus : {false, true}) {
        AgentConfig c = tiny_config();
        c.entropy_sign_plus = plus;
        const Agent ag = jittered_agent(c, 6);
        Rng rng(7);
        const TransitionBatch b = random_batch(9, c, rng);
        const nn::Matrix noise = draw_noise(9, 1, rng);
        const int subset[] = {2, 0};
        const auto y = cdq_target(ag, b, subset, noise);
        const auto pa = testing::to_double(ag.actor.params());
        for (std::size_t r = 0; r < b.size(); ++r) {
            const auto s2 = testing::to_double(b.next_states.row(r));
            const auto [a2, lp] = testing::ref_sample(ag.actor, pa, s2, noise.row(r));
            std::vector<double> sa = s2;
            sa.insert(sa.end(), a2.begin(), a2.end());
            double qmin = 1e300;
            for (int i : subset)
                qmin = std::min(qmin, testing::ref_forward(ag.targets[i], testing::to_double(ag.targets[i].params()), sa)[0]);
            const double sign = plus ? 1.0 : -1.0;
            const double expect = b.rewards[r] + 0.99 * (b.dones[r] ? 0.0 : 1.0) * (qmin + sign * 0.1 * lp);
            CHECK(y[r] == doctest::Approx(expect).epsilon(1e-4));
        }
    }
}

TEST_CASE("critic loss gradient matches central differences") {
    const AgentConfig c = tiny_config();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        CAPTURE(seed);
        Agent ag = jittered_agent(c, seed);
        Rng rng(seed + 10);
        const TransitionBatch b = random_batch(8, c, rng);
        const nn::Matrix sa = b.state_actions();
        std::vector<float> y(8), u(8);
        for (auto& v : y) v = static_cast<float>(rng.normal());
        for (auto& v : u) v = static_cast<float>(rng.uniform(0.1, 1.0));
        const auto& critic = ag.critics[0];
        nn::GradBuffer g = critic.zero_grads();
        const double loss = critic_loss(critic, sa, y, u, &g);
        auto ref = [&](std::span<const double> p) {
            double l = 0.0;
            for (std::size_t r = 0; r < 8; ++r) {
                const double d = y[r] - testing::ref_forward(critic, p, testing::to_double(sa.row(r)))[0];
                l += u[r] * d * d;
            }
            return l / 8.0;
        };
        const auto p0 = testing::to_double(critic.params());
        CHECK(loss == doctest::Approx(ref(p0)).epsilon(1e-5));
        CHECK(testing::rel_error(g, testing::central_diff(p0, ref)) < 1e-3);
    }
}

TEST_CASE("actor loss gradient matches central differences with frozen noise") {
    const AgentConfig c = tiny_config();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        CAPTURE(seed);
        Agent ag = jittered_agent(c, seed);
        Rng rng(seed + 20);
        const TransitionBatch b = random_batch(6, c, rng);
        const nn::Matrix noise = draw_noise(6, 1, rng);
        nn::GradBuffer g = ag.actor.zero_grads();
        const double loss = actor_loss(ag, b.states, noise, &g);
        auto ref = [&](std::span<const double> p) {
            double l = 0.0;
            for (std::size_t r = 0; r < 6; ++r) {
                const auto s = testing::to_double(b.states.row(r));
                const auto [a, lp] = testing::ref_sample(ag.actor, p, s, noise.row(r));
                std::vector<double> sa = s;
                sa.insert(sa.end(), a.begin(), a.end());
                double q = 0.0;
                for (const auto& critic : ag.critics)
                    q += testing::ref_forward(critic, testing::to_double(critic.params()), sa)[0];
                l += 0.1 * lp - q / 3.0;
            }
            return l / 6.0;
        };
        const auto p0 = testing::to_double(ag.actor.params());
        CHECK(loss == doctest::Approx(ref(p0)).epsilon(1e-4));
        CHECK(testing::rel_error(g, testing::central_diff(p0, ref)) < 1e-3);
    }
}

TEST_CASE("critic update lowers the weighted loss and leaves targets alone") {
    AgentConfig c = tiny_config();
    c.adam.lr = 1e-2f;
    Agent ag = jittered_agent(c, 8);
    Rng rng(9);
    const TransitionBatch b = random_batch(32, c, rng);
    const std::vector<float> y(32, 1.0f), u(32, 1.0f);
    const auto sa = b.state_actions();
    const double before = critic_loss(ag.critics[0], sa, y, u);
    const auto target_before = std::vector<float>(ag.targets[0].params().begin(), ag.targets[0].params().end());
    for (int t = 0; t < 50; ++t) critic_update(ag, b, y, u);
    CHECK(critic_loss(ag.critics[0], sa, y, u) < before);
    CHECK(std::equal(target_before.begin(), target_before.end(), ag.targets[0].params().begin()));
}

TEST_CASE("target EMA follows the Polyak rule") {
    Agent ag = jittered_agent(tiny_config(), 10);
    for (float& v : ag.critics[1].params()) v += 1.0f;
    const auto old_t = std::vector<float>(ag.targets[1].params().begin(), ag.targets[1].params().end());
    target_ema(ag, 0.995f);
    for (std::size_t k = 0; k < old_t.size(); ++k)
        CHECK(ag.targets[1].params()[k] ==
              doctest::Approx(0.995f * old_t[k] + 0.005f * ag.critics[1].params()[k]).epsilon(1e-6));
    CHECK_THROWS_AS(target_ema(ag, 0.0f), ConfigError);
}

TEST_CASE("advantage LCB against a direct recomputation") {
    const AgentConfig c = tiny_config();
    const Agent ag = jittered_agent(c, 11);
    Rng rng(12);
    const TransitionBatch b = random_batch(3, c, rng);
    const int m = c.mc_samples;
    const nn::Matrix noise = draw_noise(3 * m, 1, rng);
    const auto est = estimate_advantage_lcb(ag, b.states, b.actions, noise, m);
    auto qmin = [&](std::vector<double> sa) {
        return std::min(testing::ref_forward(ag.critics[0], testing::to_double(ag.critics[0].params()), sa)[0],
                        testing::ref_forward(ag.critics[1], testing::to_double(ag.critics[1].params()), sa)[0]);
    };
    const auto pa = testing::to_double(ag.actor.params());
    for (std::size_t r = 0; r < 3; ++r) {
        const auto s = testing::to_double(b.states.row(r));
        std::vector<double> v;
        for (int j = 0; j < m; ++j) {
            const auto [a, lp] = testing::ref_sample(ag.actor, pa, s, noise.row(r * m + j));
            std::vector<double> sa = s;
            sa.insert(sa.end(), a.begin(), a.end());
            v.push_back(qmin(sa) - 0.1 * lp);
        }
        double mean = 0.0, ss = 0.0;
        for (double x : v) mean += x / m;
        for (double x : v) ss += (x - mean) * (x - mean);
        const double se = std::sqrt(ss / (m - 1)) / std::sqrt(static_cast<double>(m));
        std::vector<double> sa = s;
        sa.push_back(b.actions(r, 0));
        const double adv = qmin(sa) - mean;
        CHECK(est[r].advantage == doctest::Approx(adv).epsilon(1e-4));
        CHECK(est[r].uncertainty == doctest::Approx(se).epsilon(1e-3));
        CHECK(est[r].lcb == doctest::Approx(adv - se).epsilon(1e-3));
    }
}

TEST_CASE("temperature tuning moves log alpha") {
    AgentConfig c = tiny_config();
    c.auto_alpha = true;
    Agent ag = jittered_agent(c, 13);
    Rng rng(14);
    const TransitionBatch b = random_batch(16, c, rng);
    const float before = ag.log_alpha;
    actor_update(ag, b, rng);
    CHECK(ag.log_alpha != before);
    CHECK(ag.alpha() == doctest::Approx(std::exp(ag.log_alpha)));
}
