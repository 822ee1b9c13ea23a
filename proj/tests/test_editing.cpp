#include <doctest.h>

#include <cmath>

#include "reed/editing.hpp"
#include "reed/errors.hpp"
#include "reed/util.hpp"

using namespace reed;

namespace {

Representation repr(std::vector<double> v) { return Representation{std::move(v)}; }

std::vector<Representation> reprs(std::initializer_list<std::vector<double>> vs) {
    std::vector<Representation> out;
    for (const auto& v : vs) out.push_back(Representation{v});
    return out;
}

DetectorModel toy_model(uint64_t seed, int F = 10, int d = 4) {
    DetectorHparams hp;
    hp.feature_dim = F;
    hp.repr_dim = d;
    hp.seed = seed;
    DetectorModel m = DetectorModel::init(hp);
    m.freeze();
    return m;
}

TokenSeq words(std::initializer_list<const char*> ts) {
    TokenSeq out;
    for (const char* t : ts) out.push_back(t);
    return out;
}

}  // namespace

TEST_CASE("offset estimation: hand means in 2-D") {
    // mu_s = (0,1), mu_t = (1,2) -> v_sub = (1,1).
    auto src = reprs({{0, 0}, {0, 2}});
    auto tgt = reprs({{1, 1}, {1, 3}});
    EditVector ev = estimate_offset_from_reprs(src, tgt, 1.0);
    CHECK(ev.v_sub == std::vector<double>{1.0, 1.0});
    CHECK(ev.m_s == 2);
    CHECK(ev.m_t == 2);

    // Identical domains produce the zero vector; swapping negates it.
    EditVector zero = estimate_offset_from_reprs(src, src, 1.0);
    CHECK(zero.v_sub == std::vector<double>{0.0, 0.0});
    EditVector swapped = estimate_offset_from_reprs(tgt, src, 1.0);
    CHECK(swapped.v_sub == std::vector<double>{-1.0, -1.0});
}

TEST_CASE("offset estimation: exact recovery of a constant shift") {
    // Representable values keep the mean arithmetic exact.
    Rng rng(21);
    std::vector<Representation> src;
    for (int i = 0; i < 32; ++i) {
        std::vector<double> v(6);
        for (double& x : v) x = static_cast<double>(rng.uniform_int(-8, 8)) * 0.25;
        src.push_back(Representation{std::move(v)});
    }
    std::vector<double> t{0.5, -1.25, 2.0, 0.0, -0.75, 3.5};
    std::vector<Representation> tgt = src;
    for (auto& r : tgt)
        for (size_t i = 0; i < t.size(); ++i) r.z[i] += t[i];
    EditVector ev = estimate_offset_from_reprs(src, tgt, 1.0);
    CHECK(ev.v_sub == t);  // exact, not approximate

    // With alpha=1 every edited target equals its source partner.
    for (size_t k = 0; k < src.size(); ++k) {
        Representation edited = apply_offset(tgt[k], ev);
        for (size_t i = 0; i < t.size(); ++i)
            CHECK(edited.z[i] == doctest::Approx(src[k].z[i]).epsilon(1e-12));
    }
}

TEST_CASE("offset estimation from text is label-blind and budgeted") {
    DetectorModel m = toy_model(31);
    std::vector<TokenSeq> src, tgt;
    for (int i = 0; i < 20; ++i) {
        src.push_back(words({"a", std::to_string(i) == "3" ? "x" : "b"}));
        tgt.push_back(words({"c", "d", std::to_string(i % 5).c_str()}));
    }
    SampleBudget sb{8, 77};
    SampleBudget tb{8, 78};
    EditVector ev = estimate_offset(m, src, tgt, 1.0, sb, tb);
    CHECK(ev.m_s == 8);
    CHECK(ev.m_t == 8);
    CHECK(ev.v_sub.size() == 4);

    // The estimate is a pure function of the token sequences; there is no
    // label input whose permutation could change it.
    EditVector again = estimate_offset(m, src, tgt, 1.0, sb, tb);
    CHECK(ev.v_sub == again.v_sub);

    SampleBudget all{1000, 5};
    EditVector full = estimate_offset(m, src, tgt, 1.0, all, all);
    CHECK(full.m_s == 20);  // fewer samples than budget: use all, record actual
    CHECK_THROWS_AS(estimate_offset(m, {}, tgt, 1.0, sb, tb), ParamError);
}

TEST_CASE("apply_offset arithmetic") {
    EditVector ev;
    ev.v_sub = {1.0, 1.0};
    ev.alpha = 1.0;
    Representation z = repr({1.0, 2.0});
    CHECK(apply_offset(z, ev).z == std::vector<double>{0.0, 1.0});

    ev.alpha = 0.0;
    CHECK(apply_offset(z, ev).z == z.z);  // identity at zero strength

    EditVector zero;
    zero.v_sub = {0.0, 0.0};
    zero.alpha = 2.0;
    CHECK(apply_offset(z, zero).z == z.z);

    EditVector bad;
    bad.v_sub = {1.0};
    CHECK_THROWS_AS(apply_offset(z, bad), ShapeError);
}

TEST_CASE("direction estimation: hand normalization") {
    // mu0 = (0,0), mu1 = (3,4): direction (0.6, 0.8).
    auto covers = reprs({{0, 0}, {0, 0}});
    auto stegos = reprs({{3, 4}});
    DirectionVector dv = estimate_direction_from_reprs(covers, stegos, 2.4);
    CHECK(dv.v_norm[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(dv.v_norm[1] == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(dv.mu0 == std::vector<double>{0.0, 0.0});
    CHECK(dv.lambda == 2.4);
    CHECK(dv.n0 == 2);
    CHECK(dv.n1 == 1);

    CHECK_THROWS_AS(estimate_direction_from_reprs(covers, covers, 1.0),
                    DegenerateDirectionError);
    CHECK_THROWS_AS(estimate_direction_from_reprs(covers, stegos, -0.5), ParamError);
}

TEST_CASE("direction is invariant to positive rescaling of representations") {
    Rng rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Representation> covers, stegos;
        for (int i = 0; i < 6; ++i) {
            std::vector<double> c(5), s(5);
            for (double& x : c) x = rng.uniform_real(-1, 1);
            for (double& x : s) x = rng.uniform_real(-1, 1) + 0.5;
            covers.push_back(Representation{c});
            stegos.push_back(Representation{s});
        }
        DirectionVector base = estimate_direction_from_reprs(covers, stegos, 1.0);
        double c = rng.uniform_real(0.1, 9.0);
        for (auto& r : covers)
            for (double& x : r.z) x *= c;
        for (auto& r : stegos)
            for (double& x : r.z) x *= c;
        DirectionVector scaled = estimate_direction_from_reprs(covers, stegos, 1.0);
        for (size_t i = 0; i < base.v_norm.size(); ++i)
            CHECK(scaled.v_norm[i] == doctest::Approx(base.v_norm[i]).epsilon(1e-9));

        // Unit norm within 1e-12, every time.
        double norm = 0.0;
        for (double x : base.v_norm) norm += x * x;
        CHECK(std::abs(std::sqrt(norm) - 1.0) < 1e-12);
    }
}

TEST_CASE("projection score is the signed displacement") {
    DirectionVector dv;
    dv.mu0 = {0.0, 0.0};
    dv.v_norm = {0.6, 0.8};
    CHECK(projection_score(repr({0.0, 0.0}), dv) == 0.0);
    // z = mu0 + 2 v_norm projects to exactly 2.
    CHECK(projection_score(repr({1.2, 1.6}), dv) == doctest::Approx(2.0).epsilon(1e-12));
    // Hand dot product: (1,1).(0.6,0.8) = 1.4.
    CHECK(projection_score(repr({1.0, 1.0}), dv) == doctest::Approx(1.4).epsilon(1e-12));
    DirectionVector bad = dv;
    bad.v_norm = {1.0};
    CHECK_THROWS_AS(projection_score(repr({1.0, 1.0}), bad), ShapeError);
}

TEST_CASE("apply_direction: identity, fixed point, and the lambda=5 example") {
    DirectionVector dv;
    dv.mu0 = {0.5, -0.25};
    dv.v_norm = {0.6, 0.8};

    dv.lambda = 0.0;
    Representation z = repr({0.9, 0.3});
    CHECK(apply_direction(z, dv).z == z.z);

    // The cover mean is a fixed point for any strength.
    for (double lambda : {0.1, 1.0, 5.0, 10.0}) {
        dv.lambda = lambda;
        Representation mu = repr({0.5, -0.25});
        CHECK(apply_direction(mu, dv).z == mu.z);
    }

    // z = mu0 + v_norm with lambda 5 lands at mu0 + 6 v_norm.
    dv.lambda = 5.0;
    Representation zp = repr({0.5 + 0.6, -0.25 + 0.8});
    Representation edited = apply_direction(zp, dv);
    CHECK(edited.z[0] == doctest::Approx(0.5 + 6.0 * 0.6).epsilon(1e-12));
    CHECK(edited.z[1] == doctest::Approx(-0.25 + 6.0 * 0.8).epsilon(1e-12));
}

TEST_CASE("estimation and application leave a frozen model untouched") {
    DetectorModel m = toy_model(51);
    uint64_t before = m.checksum();
    std::vector<TokenSeq> covers, stegos;
    for (int i = 0; i < 12; ++i) {
        covers.push_back(words({"plain", std::to_string(i).c_str()}));
        stegos.push_back(words({"odd", std::to_string(i * 3).c_str(), "tail"}));
    }
    SampleBudget budget{1000, 9};
    DirectionVector dv = estimate_direction(m, covers, stegos, 1.5, budget);
    EditVector ev = estimate_offset(m, covers, stegos, 1.0, budget, budget);
    Representation z = m.represent(words({"plain", "7"}));
    apply_offset(z, ev);
    apply_direction(z, dv);
    projection_score(z, dv);
    CHECK(m.checksum() == before);
}

TEST_CASE("vector files round-trip bit-exactly") {
    EditVector ev;
    ev.v_sub = {0.1, -0.2, 1.0 / 3.0};
    ev.alpha = 1.0;
    ev.m_s = 1000;
    ev.m_t = 999;
    nlohmann::json j = offset_to_json(ev, {{"model_checksum", "abc"}});
    nlohmann::json prov;
    EditVector back = offset_from_json(j, &prov);
    CHECK(back.v_sub == ev.v_sub);
    CHECK(back.alpha == ev.alpha);
    CHECK(back.m_s == 1000);
    CHECK(prov.at("model_checksum") == "abc");

    DirectionVector dv;
    dv.mu0 = {0.5, std::sqrt(2.0)};
    dv.v_norm = {1.0, 0.0};
    dv.lambda = 2.4;
    dv.n0 = dv.n1 = 500;
    DirectionVector dback = direction_from_json(direction_to_json(dv));
    CHECK(dback.mu0 == dv.mu0);
    CHECK(dback.v_norm == dv.v_norm);
    CHECK(dback.lambda == 2.4);

    CHECK_THROWS_AS(offset_from_json(nlohmann::json{{"kind", "direction"}}), IoError);
}
