#include <cmath>
#include <functional>
#include <ostream>

#include "reed/editing.hpp"
#include "reed/errors.hpp"
#include "reed/eval.hpp"
#include "reed/lm.hpp"
#include "reed/pipeline.hpp"
#include "reed/stego.hpp"
#include "reed/ttem.hpp"
#include "reed/util.hpp"

namespace reed {

namespace {

FeatureVector random_features(int dim, int nnz, Rng& rng) {
    FeatureVector x;
    x.dim = dim;
    std::vector<int32_t> idx;
    for (int i = 0; i < dim; ++i) idx.push_back(i);
    shuffle(idx, rng);
    idx.resize(static_cast<size_t>(std::min(nnz, dim)));
    std::sort(idx.begin(), idx.end());
    for (int32_t i : idx) x.entries.emplace_back(i, rng.uniform_real(-1.0, 1.0));
    return x;
}

DetectorModel random_model(Rng& rng, int F, int d) {
    DetectorHparams hp;
    hp.feature_dim = F;
    hp.repr_dim = d;
    hp.seed = rng.next_u64();
    return DetectorModel::init(hp);
}

}  // namespace

int run_selfcheck(std::ostream& out) {
    int failures = 0;
    auto check = [&](const std::string& name, const std::function<bool()>& fn) {
        bool ok = false;
        std::string note;
        try {
            ok = fn();
        } catch (const std::exception& e) {
            note = std::string(" (") + e.what() + ")";
        }
        out << (ok ? "[ok]   " : "[FAIL] ") << name << note << "\n";
        if (!ok) ++failures;
    };

    check("cross-entropy gradients vs finite differences (5 random models)", [] {
        Rng rng(101);
        for (int k = 0; k < 5; ++k) {
            DetectorModel m = random_model(rng, 12, 5);
            FeatureVector x = random_features(12, 6, rng);
            if (grad_check(m, x, static_cast<int>(rng.below(2))) > 1e-5) return false;
        }
        return true;
    });

    check("entropy gradients vs finite differences (5 random logit pairs)", [] {
        Rng rng(202);
        for (int k = 0; k < 5; ++k) {
            std::array<double, 2> u{rng.uniform_real(-3, 3), rng.uniform_real(-3, 3)};
            std::array<double, 2> g = entropy_grad_logits(u);
            for (int c = 0; c < 2; ++c) {
                const double h = 1e-6;
                std::array<double, 2> up = u, um = u;
                up[static_cast<size_t>(c)] += h;
                um[static_cast<size_t>(c)] -= h;
                double numeric = (prediction_entropy(std::span(&up, 1)) -
                                  prediction_entropy(std::span(&um, 1))) /
                                 (2 * h);
                double denom = std::max(1e-8, std::abs(numeric) + std::abs(g[static_cast<size_t>(c)]));
                if (std::abs(numeric - g[static_cast<size_t>(c)]) / denom > 1e-5) return false;
            }
        }
        return true;
    });

    check("coder round trips (3 coders x 25 payloads)", [] {
        SyntheticSpec spec;
        spec.name = "check";
        spec.topic_prefix = "chk";
        spec.sentences = 200;
        spec.seed = 5;
        NGramLM lm = NGramLM::train(synthesize_corpus(spec), 3, 0.1);
        CoderParams params;
        params.max_len = 600;
        for (Coder coder : {Coder::HC, Coder::AC, Coder::ADG}) {
            params.coder = coder;
            for (int k = 0; k < 25; ++k) {
                BitString bits = BitString::random(1 + static_cast<size_t>(k) * 7 % 200,
                                                   derive_seed(900, coder_name(coder), static_cast<uint64_t>(k)));
                TextRecord rec = stego_encode(lm, bits, params);
                if (!(stego_decode(lm, rec.tokens, bits.size(), params) == bits)) return false;
            }
        }
        return true;
    });

    check("identity editing at zero strength", [] {
        Rng rng(303);
        DetectorModel m = random_model(rng, 16, 6);
        m.freeze();
        EditVector ev;
        ev.alpha = 0.0;
        ev.v_sub.assign(6, 0.5);
        DirectionVector dv;
        dv.lambda = 0.0;
        dv.mu0.assign(6, 0.0);
        dv.v_norm.assign(6, 0.0);
        dv.v_norm[0] = 1.0;
        for (int k = 0; k < 20; ++k) {
            FeatureVector x = random_features(16, 8, rng);
            Representation z = m.extract(x);
            if (!(apply_offset(z, ev) == z)) return false;
            if (!(apply_direction(z, dv) == z)) return false;
        }
        return true;
    });

    check("frozen model untouched by estimation/editing/adaptation", [] {
        Rng rng(404);
        DetectorModel m = random_model(rng, 16, 6);
        m.freeze();
        uint64_t before = m.checksum();
        std::vector<Representation> src, tgt;
        for (int k = 0; k < 8; ++k) {
            src.push_back(m.extract(random_features(16, 8, rng)));
            tgt.push_back(m.extract(random_features(16, 8, rng)));
        }
        EditVector ev = estimate_offset_from_reprs(src, tgt, 1.0);
        apply_offset(src[0], ev);
        std::vector<FeatureVector> batch;
        for (int k = 0; k < 8; ++k) batch.push_back(random_features(16, 8, rng));
        TtemConfig tc;
        ttem_run(m, batch, tc);
        return m.checksum() == before;
    });

    check("metric formulas on the worked confusion (80,70,30,20)", [] {
        Confusion c{80, 70, 30, 20};
        return accuracy(c) == 0.75 && std::abs(f1(c) - 160.0 / 210.0) < 1e-15;
    });

    return failures;
}

}  // namespace reed
