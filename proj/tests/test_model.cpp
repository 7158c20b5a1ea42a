#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "resbemf/error.hpp"
#include "resbemf/model.hpp"

using namespace resbemf;

TEST_CASE("score set maps values and indices") {
    ScoreSet s({0.5, 1.0, 1.5, 2.0});
    CHECK(s.size() == 4);
    CHECK(s.min() == 0.5);
    CHECK(s.max() == 2.0);
    for (std::size_t j = 0; j < s.size(); ++j) {
        CHECK(s.index(s.value(j)) == j);
    }
    CHECK_FALSE(s.find(1.25));
    CHECK_THROWS_AS(s.index(3.0), std::domain_error);
    CHECK(s.nearest(1.25) == 2);  // tie goes up
    CHECK(s.nearest(-4.0) == 0);
    CHECK(s.nearest(9.0) == 3);

    CHECK_THROWS_AS(ScoreSet({1.0}), std::invalid_argument);
    CHECK_THROWS_AS(ScoreSet({2.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(ScoreSet({1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("hyperparameter validation") {
    Hyperparams hp;
    CHECK_NOTHROW(hp.validate());
    hp.k = 0;
    CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
    hp = {};
    hp.m = 0;
    CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
    hp = {};
    hp.eta = 0.0;
    CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
    hp = {};
    hp.gamma = -0.1;
    CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
}

TEST_CASE("softmax") {
    SUBCASE("zero vector is uniform") {
        const auto p = softmax(std::vector<double>(5, 0.0));
        for (double v : p) {
            CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
        }
    }
    SUBCASE("two-point value") {
        const auto p = softmax(std::vector<double>{1.0, 0.0});
        CHECK(std::fabs(p[0] - 0.731058578630004879) < 1e-12);
        CHECK(std::fabs(p[1] - 0.268941421369995121) < 1e-12);
    }
    SUBCASE("non-finite input is rejected") {
        CHECK_THROWS_AS(softmax(std::vector<double>{1.0, NAN}), std::domain_error);
        CHECK_THROWS_AS(softmax(std::vector<double>{INFINITY, 0.0}), std::domain_error);
    }
    SUBCASE("large logits do not overflow") {
        const auto p = softmax(std::vector<double>{1000.0, 999.0});
        CHECK(std::fabs(p[0] - 0.731058578630004879) < 1e-12);
    }
}

TEST_CASE("softmax sums to one and is shift invariant") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> x(-10.0, 10.0), c(-50.0, 50.0);
    std::uniform_int_distribution<int> len(1, 10);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> v(static_cast<std::size_t>(len(gen)));
        for (auto& e : v) {
            e = x(gen);
        }
        const auto p = softmax(v);
        CHECK(std::fabs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-12);
        const double shift = c(gen);
        auto shifted = v;
        for (auto& e : shifted) {
            e += shift;
        }
        const auto q = softmax(shifted);
        for (std::size_t j = 0; j < p.size(); ++j) {
            CHECK(std::fabs(p[j] - q[j]) < 1e-12);
        }
        const auto o = oracle::softmax(v);
        for (std::size_t j = 0; j < p.size(); ++j) {
            CHECK(std::fabs(p[j] - o[j]) < 1e-12);
        }
    }
}

TEST_CASE("predict_distribution") {
    SUBCASE("zero factors give the uniform distribution") {
        Hyperparams hp;
        hp.k = 3;
        FactorModel model(fixtures::stars(), hp, fixtures::ids("u", 1), fixtures::ids("i", 1));
        const auto dist = predict_distribution(model, 0, 0);
        CHECK(dist.reliability == doctest::Approx(0.2));
        CHECK(dist.mode_index == 0);
        CHECK(dist.mean == doctest::Approx(3.0));
    }
    SUBCASE("constructed logits (1, 0, 0)") {
        Hyperparams hp;
        hp.k = 2;
        FactorModel model(fixtures::stars(3), hp, fixtures::ids("u", 1), fixtures::ids("i", 1));
        model.P.vec(0, 0)[0] = 2.0;
        model.Q.vec(0, 0)[0] = 0.5;
        model.P.vec(0, 1)[1] = 3.0;  // Q is zero on this channel
        const auto dist = predict_distribution(model, 0, 0);
        CHECK(std::fabs(dist.probs[0] - 0.576116884765829110) < 1e-12);
        CHECK(std::fabs(dist.probs[1] - 0.211941557617085445) < 1e-12);
        CHECK(std::fabs(dist.probs[2] - 0.211941557617085445) < 1e-12);
        CHECK(dist.mode_index == 0);
        CHECK(dist.reliability == dist.probs[0]);
    }
    SUBCASE("matches dot-product plus softmax oracle, including after channel rescaling") {
        std::mt19937_64 gen(11);
        auto model = fixtures::random_model(gen, 3, 4, 5, 3);
        for (auto& v : model.P.vec(1, 2)) {
            v *= 3.0;
        }
        for (auto& v : model.Q.vec(2, 2)) {
            v *= -0.5;
        }
        for (std::size_t u = 0; u < 3; ++u) {
            for (std::size_t i = 0; i < 4; ++i) {
                const auto dist = predict_distribution(model, u, i);
                const auto expect = oracle::softmax(oracle::logits(model, u, i));
                for (std::size_t s = 0; s < 5; ++s) {
                    CHECK(std::fabs(dist.probs[s] - expect[s]) < 1e-12);
                }
            }
        }
    }
    SUBCASE("unknown rows and ids signal cold start") {
        std::mt19937_64 gen(1);
        auto model = fixtures::random_model(gen, 2, 2, 5, 2);
        CHECK_THROWS_AS(predict_distribution(model, 2, 0), ColdStartError);
        CHECK_THROWS_AS(predict_distribution(model, 0, 5), ColdStartError);
        CHECK_THROWS_AS(predict_distribution(model, std::string("nobody"), std::string("i0")), ColdStartError);
        CHECK_NOTHROW(predict_distribution(model, std::string("u1"), std::string("i0")));
    }
}

TEST_CASE("mode ties go to the smallest index") {
    const auto dist = PredictionDistribution::from_probs({0.1, 0.4, 0.4, 0.1}, fixtures::stars(4));
    CHECK(dist.mode_index == 1);
    CHECK(dist.reliability == 0.4);
}

TEST_CASE("distribution invariants on random models") {
    std::mt19937_64 gen(3);
    auto model = fixtures::random_model(gen, 6, 9, 5, 4, 0.0, -2.0, 2.0);
    for (std::size_t u = 0; u < 6; ++u) {
        for (std::size_t i = 0; i < 9; ++i) {
            const auto dist = predict_distribution(model, u, i);
            double total = 0.0, top = 0.0;
            for (double p : dist.probs) {
                CHECK(p >= 0.0);
                CHECK(p <= 1.0);
                total += p;
                top = std::max(top, p);
            }
            CHECK(std::fabs(total - 1.0) < 1e-9);
            CHECK(dist.reliability == top);
        }
    }
}

TEST_CASE("predict applies the reliability threshold") {
    SUBCASE("uniform distribution below 0.5") {
        Hyperparams hp;
        FactorModel model(fixtures::stars(), hp, fixtures::ids("u", 1), fixtures::ids("i", 1));
        CHECK_FALSE(predict(model, 0, 0, 0.5));
        const auto p = predict(model, 0, 0, 0.0);
        REQUIRE(p);
        CHECK(p->value == 1.0);
    }
    SUBCASE("constructed distribution (0.1, 0.7, 0.2)") {
        // logits log(p) reproduce the distribution exactly up to rounding
        Hyperparams hp;
        hp.k = 1;
        FactorModel model(fixtures::stars(3), hp, fixtures::ids("u", 1), fixtures::ids("i", 1));
        const double probs[] = {0.1, 0.7, 0.2};
        for (std::size_t s = 0; s < 3; ++s) {
            model.P.vec(0, s)[0] = std::log(probs[s]);
            model.Q.vec(0, s)[0] = 1.0;
        }
        const auto p = predict(model, 0, 0, 0.7 - 1e-12);
        REQUIRE(p);
        CHECK(p->value == 2.0);
        CHECK(p->reliability == doctest::Approx(0.7).epsilon(1e-12));
        CHECK_FALSE(predict(model, 0, 0, 0.7 + 1e-9));
    }
    SUBCASE("theta outside [0, 1]") {
        Hyperparams hp;
        FactorModel model(fixtures::stars(), hp, fixtures::ids("u", 1), fixtures::ids("i", 1));
        CHECK_THROWS_AS(predict(model, 0, 0, 1.5), std::invalid_argument);
    }
    SUBCASE("threshold filtering is monotone and theta = 0 always predicts") {
        std::mt19937_64 gen(5);
        auto model = fixtures::random_model(gen, 5, 6, 5, 3, 0.0, -1.5, 1.5);
        const double grid[] = {0.0, 0.2, 0.3, 0.4, 0.6, 0.8, 1.0};
        for (std::size_t u = 0; u < 5; ++u) {
            for (std::size_t i = 0; i < 6; ++i) {
                CHECK(predict(model, u, i, 0.0).has_value());
                for (std::size_t t = 1; t < std::size(grid); ++t) {
                    if (predict(model, u, i, grid[t])) {
                        CHECK(predict(model, u, i, grid[t - 1]).has_value());
                    }
                }
            }
        }
    }
}

TEST_CASE("log_likelihood") {
    SUBCASE("single rating on zero factors") {
        Hyperparams hp;
        FactorModel model(fixtures::stars(), hp, fixtures::ids("u", 1), fixtures::ids("i", 1));
        const std::vector<RowRating> r{{0, 0, 4.0}};
        CHECK(std::fabs(log_likelihood(model, r) - (-1.6094379124341004)) < 1e-12);
    }
    SUBCASE("empty rating set") {
        std::mt19937_64 gen(2);
        auto model = fixtures::random_model(gen, 2, 2, 5, 2, 0.3);
        CHECK(log_likelihood(model, {}) == 0.0);
    }
    SUBCASE("matches the per-rating oracle") {
        std::mt19937_64 gen(9);
        for (double gamma : {0.0, 0.25}) {
            auto model = fixtures::random_model(gen, 3, 3, 5, 2, gamma);
            const std::vector<RowRating> r{{0, 1, 5.0}, {2, 0, 1.0}, {1, 2, 3.0}};
            CHECK(std::fabs(log_likelihood(model, r) - oracle::log_likelihood(model, r)) < 1e-12);
            if (gamma == 0.0) {
                CHECK(log_likelihood(model, r) <= 0.0);
            }
        }
    }
    SUBCASE("rating outside the score set") {
        std::mt19937_64 gen(2);
        auto model = fixtures::random_model(gen, 1, 1, 5, 2);
        const std::vector<RowRating> r{{0, 0, 2.5}};
        CHECK_THROWS_AS(log_likelihood(model, r), std::domain_error);
    }
}

namespace {

// Sum of rating_gradient over all ratings against central differences of
// the penalized log-likelihood, for every entry of P and Q.
double gradient_error(FactorModel& model, const std::vector<RowRating>& ratings) {
    const std::size_t width = model.score_set.size() * model.hyperparams.k;
    std::vector<double> analytic_p(model.P.data().size(), 0.0), analytic_q(model.Q.data().size(), 0.0);
    for (const auto& r : ratings) {
        const auto g = rating_gradient(model, r.user, r.item, r.value);
        for (std::size_t j = 0; j < width; ++j) {
            analytic_p[r.user * width + j] += g.user[j];
            analytic_q[r.item * width + j] += g.item[j];
        }
    }
    const auto f = [&] { return oracle::log_likelihood(model, ratings); };
    std::vector<double> numeric_p, numeric_q;
    for (auto& v : model.P.data()) {
        numeric_p.push_back(oracle::central_difference(v, 1e-5, f));
    }
    for (auto& v : model.Q.data()) {
        numeric_q.push_back(oracle::central_difference(v, 1e-5, f));
    }
    analytic_p.insert(analytic_p.end(), analytic_q.begin(), analytic_q.end());
    numeric_p.insert(numeric_p.end(), numeric_q.begin(), numeric_q.end());
    return oracle::relative_error(analytic_p, numeric_p);
}

} // namespace

TEST_CASE("rating_gradient") {
    SUBCASE("zero factors give a zero gradient") {
        Hyperparams hp;
        hp.k = 2;
        hp.gamma = 0.1;
        FactorModel model(fixtures::stars(), hp, fixtures::ids("u", 1), fixtures::ids("i", 1));
        const auto g = rating_gradient(model, 0, 0, 3.0);
        for (double v : g.user) {
            CHECK(v == 0.0);
        }
        for (double v : g.item) {
            CHECK(v == 0.0);
        }
    }
    SUBCASE("matches finite differences on a 3 x 4 instance") {
        std::mt19937_64 gen(21);
        auto model = fixtures::random_model(gen, 3, 4, 3, 2, 0.05);
        std::vector<RowRating> ratings{{0, 0, 1.0}, {0, 2, 3.0}, {1, 1, 2.0}, {1, 3, 3.0}, {2, 0, 2.0}, {2, 3, 1.0}};
        CHECK(gradient_error(model, ratings) < 1e-4);
    }
    SUBCASE("observed channel follows (1 - sigma_r) Q") {
        std::mt19937_64 gen(4);
        auto model = fixtures::random_model(gen, 1, 1, 4, 3, 0.0, 0.0, 1.0);
        const auto g = rating_gradient(model, 0, 0, 2.0);
        const auto probs = oracle::softmax(oracle::logits(model, 0, 0));
        for (std::size_t f = 0; f < 3; ++f) {
            const double q = model.Q.vec(0, 1)[f];
            CHECK(g.user[1 * 3 + f] == doctest::Approx((1.0 - probs[1]) * q).epsilon(1e-12));
            CHECK(g.user[1 * 3 + f] >= 0.0);  // Q >= 0 here
            const double q0 = model.Q.vec(0, 0)[f];
            CHECK(g.user[0 * 3 + f] == doctest::Approx(-probs[0] * q0).epsilon(1e-12));
        }
    }
}

TEST_CASE("rating_gradient matches finite differences on random instances") {
    std::mt19937_64 gen(1234);
    std::uniform_int_distribution<std::size_t> n_users(1, 5), n_items(1, 7);
    std::uniform_real_distribution<double> gamma(0.0, 0.2), coin(0.0, 1.0);
    std::uniform_int_distribution<int> score(1, 5);
    for (int trial = 0; trial < 25; ++trial) {
        const auto users = n_users(gen);
        const auto items = n_items(gen);
        auto model = fixtures::random_model(gen, users, items, 5, 3, gamma(gen));
        std::vector<RowRating> ratings;
        for (std::size_t u = 0; u < users; ++u) {
            for (std::size_t i = 0; i < items; ++i) {
                if (coin(gen) < 0.6) {
                    ratings.push_back({u, i, static_cast<double>(score(gen))});
                }
            }
        }
        if (ratings.empty()) {
            ratings.push_back({0, 0, 3.0});
        }
        CHECK(gradient_error(model, ratings) < 1e-4);
    }
}

TEST_CASE("fit") {
    std::mt19937_64 gen(77);
    const auto users = fixtures::ids("u", 4);
    const auto items = fixtures::ids("i", 4);
    const auto ratings = fixtures::dense_ratings(gen, 4, 4);

    SUBCASE("raises the log-likelihood") {
        Hyperparams hp{3, 0.0, 0.01, 100, 5};
        double initial = 0.0, final_ll = 0.0;
        FitOptions options;
        options.on_epoch = [&](const EpochReport& r, const FactorModel& m) {
            const double ll = log_likelihood(m, ratings);
            if (r.epoch == 0) {
                initial = ll;
            }
            final_ll = ll;
        };
        fit(fixtures::stars(), users, items, ratings, hp, options);
        CHECK(final_ll > initial);
    }
    SUBCASE("epoch contract") {
        Hyperparams hp{2, 0.1, 0.01, 1, 5};
        std::vector<EpochReport> reports;
        FitOptions options;
        options.on_epoch = [&](const EpochReport& r, const FactorModel&) { reports.push_back(r); };
        fit(fixtures::stars(), users, items, ratings, hp, options);
        REQUIRE(reports.size() == 2);
        CHECK(reports[0].epoch == 0);
        CHECK(reports[1].epoch == 1);
        CHECK(reports[1].user_updates == ratings.size());
        CHECK(reports[1].item_updates == ratings.size());

        hp.m = 0;
        CHECK_THROWS_AS(fit(fixtures::stars(), users, items, ratings, hp), std::invalid_argument);
    }
    SUBCASE("initialisation lies in [0, 1) and training is seed-deterministic") {
        Hyperparams hp{3, 0.05, 0.01, 20, 99};
        FitOptions options;
        options.on_epoch = [](const EpochReport& r, const FactorModel& m) {
            if (r.epoch == 0) {
                for (double v : m.P.data()) {
                    CHECK((v >= 0.0 && v < 1.0));
                }
            }
        };
        const auto a = fit(fixtures::stars(), users, items, ratings, hp, options);
        const auto b = fit(fixtures::stars(), users, items, ratings, hp);
        CHECK(a.P == b.P);
        CHECK(a.Q == b.Q);
        hp.seed = 100;
        const auto c = fit(fixtures::stars(), users, items, ratings, hp);
        CHECK_FALSE(a.P == c.P);
    }
    SUBCASE("thread count does not change the result") {
        Hyperparams hp{3, 0.05, 0.01, 10, 1};
        const auto data = fixtures::synthetic_dataset(40, 30, 0.3, 8);
        const auto view = training_view(data, data.ratings);
        FitOptions serial, parallel;
        parallel.threads = 4;
        const auto a = fit(data.scores(), view.users, view.items, view.ratings, hp, serial);
        const auto b = fit(data.scores(), view.users, view.items, view.ratings, hp, parallel);
        CHECK(a.P == b.P);
        CHECK(a.Q == b.Q);
    }
    SUBCASE("errors") {
        Hyperparams hp{2, 0.0, 0.01, 1, 0};
        CHECK_THROWS_AS(fit(fixtures::stars(), users, items, {}, hp), std::invalid_argument);
        const std::vector<RowRating> bad{{0, 0, 7.0}};
        CHECK_THROWS_AS(fit(fixtures::stars(), users, items, bad, hp), std::domain_error);
        Hyperparams wild{10, 0.0, 1e6, 50, 0};
        CHECK_THROWS_AS(fit(fixtures::stars(), users, items, ratings, wild), TrainingError);
    }
}

TEST_CASE("log-likelihood rarely decreases with a small step") {
    std::mt19937_64 gen(31);
    const auto ratings = fixtures::dense_ratings(gen, 5, 5);
    Hyperparams hp{3, 0.0, 0.01, 200, 17};
    std::vector<double> trace;
    FitOptions options;
    options.on_epoch = [&](const EpochReport&, const FactorModel& m) { trace.push_back(log_likelihood(m, ratings)); };
    fit(fixtures::stars(), fixtures::ids("u", 5), fixtures::ids("i", 5), ratings, hp, options);
    std::size_t non_decreasing = 0;
    for (std::size_t j = 1; j < trace.size(); ++j) {
        non_decreasing += trace[j] >= trace[j - 1] ? 1 : 0;
    }
    CHECK(double(non_decreasing) >= 0.95 * double(trace.size() - 1));
    CHECK(trace.back() > trace.front());
}
