#include "reed/stego.hpp"

#include <algorithm>
#include <queue>

#include "reed/errors.hpp"
#include "reed/util.hpp"

namespace reed {

BitString BitString::from_string(std::string_view s) {
    BitString b;
    b.bits.reserve(s.size());
    for (char c : s) {
        if (c == '0')
            b.bits.push_back(0);
        else if (c == '1')
            b.bits.push_back(1);
        else
            throw ParseError("BitString: expected only '0'/'1' characters");
    }
    return b;
}

std::string BitString::to_string() const {
    std::string s;
    s.reserve(bits.size());
    for (uint8_t b : bits) s.push_back(b ? '1' : '0');
    return s;
}

BitString BitString::random(size_t n, uint64_t seed) {
    Rng rng(derive_seed(seed, "bits"));
    BitString b;
    b.bits.reserve(n);
    for (size_t i = 0; i < n; ++i) b.bits.push_back(static_cast<uint8_t>(rng.next_u64() & 1));
    return b;
}

Coder coder_from_name(std::string_view name) {
    if (name == "HC") return Coder::HC;
    if (name == "AC") return Coder::AC;
    if (name == "ADG") return Coder::ADG;
    throw ParamError("unknown coder: '" + std::string(name) + "'");
}

std::string coder_name(Coder c) {
    switch (c) {
        case Coder::HC: return "HC";
        case Coder::AC: return "AC";
        case Coder::ADG: return "ADG";
    }
    throw ParamError("invalid coder enum");
}

void CoderParams::validate() const {
    if (coder == Coder::HC && pool_size < 2)
        throw ParamError("CoderParams: pool_size must be >= 2 for HC");
    if (coder == Coder::AC && (precision_bits < 16 || precision_bits > 62))
        throw ParamError("CoderParams: precision_bits must be in [16, 62]");
    if (min_len < 1 || max_len < min_len)
        throw ParamError("CoderParams: need max_len >= min_len >= 1");
}

namespace {

using Entry = std::pair<int32_t, double>;  // (local token id, probability)

// Candidate pool for the payload phase: canonical order, reserved ids removed
// so a bit choice can never terminate the sentence or emit <unk>.
std::vector<Entry> payload_pool(const TokenDistribution& dist) {
    std::vector<Entry> pool;
    pool.reserve(dist.entries.size());
    for (const auto& e : dist.entries) {
        if (e.first >= NGramLM::kReserved) pool.push_back(e);
    }
    return pool;
}

// Greedy continuation after the payload: argmax tokens until <eos> or max_len.
// <eos> is skipped while the sentence is shorter than min_len.
void greedy_tail(const NGramLM& lm, std::vector<int32_t>& ids, const CoderParams& params) {
    while (static_cast<int>(ids.size()) < params.max_len) {
        TokenDistribution dist = lm.next_dist(ids);
        int32_t picked = -1;
        for (const auto& [id, p] : dist.entries) {
            if (id == NGramLM::kEos && static_cast<int>(ids.size()) < params.min_len) continue;
            picked = id;
            break;
        }
        if (picked < 0 || picked == NGramLM::kEos) break;
        ids.push_back(picked);
    }
}

TextRecord finish_record(const NGramLM& lm, const std::vector<int32_t>& ids, size_t payload_len,
                         Coder coder, const std::string& domain) {
    TextRecord rec;
    rec.tokens = lm.to_tokens(ids);
    rec.label = 1;
    rec.domain = domain;
    rec.algorithm = coder_name(coder);
    rec.payload_bits = static_cast<int64_t>(payload_len);
    return rec;
}

// ---------------------------------------------------------------------------
// Huffman coding

struct HuffNode {
    double prob;
    int32_t tie;  // smallest token id in the subtree
    int left = -1, right = -1;
    int32_t token = -1;  // leaf only
};

struct HuffCmp {
    const std::vector<HuffNode>* nodes;
    bool operator()(int a, int b) const {
        const HuffNode& na = (*nodes)[static_cast<size_t>(a)];
        const HuffNode& nb = (*nodes)[static_cast<size_t>(b)];
        if (na.prob != nb.prob) return na.prob > nb.prob;  // min-heap on prob
        return na.tie > nb.tie;
    }
};

// Canonical Huffman tree: repeatedly merge the two lowest-probability nodes,
// ties broken by smallest contained token id; branch 0 always leads to the
// higher-probability (tie: smaller id) child. Returns the root index.
int build_huffman(const std::vector<Entry>& pool, std::vector<HuffNode>& nodes) {
    nodes.clear();
    std::priority_queue<int, std::vector<int>, HuffCmp> heap{HuffCmp{&nodes}};
    for (const auto& [id, p] : pool) {
        nodes.push_back(HuffNode{p, id, -1, -1, id});
        heap.push(static_cast<int>(nodes.size()) - 1);
    }
    while (heap.size() > 1) {
        int a = heap.top();
        heap.pop();
        int b = heap.top();
        heap.pop();
        // a is the lowest (prob, tie); it goes on the 1-branch unless b has
        // strictly higher probability, in which case b is the 0-branch anyway.
        const HuffNode& na = nodes[static_cast<size_t>(a)];
        const HuffNode& nb = nodes[static_cast<size_t>(b)];
        int zero = b, one = a;
        if (na.prob == nb.prob && na.tie < nb.tie) {
            zero = a;
            one = b;
        }
        nodes.push_back(HuffNode{na.prob + nb.prob, std::min(na.tie, nb.tie), zero, one, -1});
        heap.push(static_cast<int>(nodes.size()) - 1);
    }
    return heap.top();
}

std::vector<Entry> hc_pool(const NGramLM& lm, std::span<const int32_t> ids,
                           const CoderParams& params) {
    std::vector<Entry> pool = payload_pool(lm.next_dist(ids));
    if (pool.size() > static_cast<size_t>(params.pool_size))
        pool.resize(static_cast<size_t>(params.pool_size));
    return pool;
}

}  // namespace

TextRecord hc_encode(const NGramLM& lm, const BitString& bits, const CoderParams& params,
                     const std::string& domain) {
    CoderParams p = params;
    p.coder = Coder::HC;
    p.validate();

    std::vector<int32_t> ids;
    size_t consumed = 0;
    std::vector<HuffNode> nodes;
    while (consumed < bits.size()) {
        if (static_cast<int>(ids.size()) >= p.max_len)
            throw CapacityError("hc_encode: max_len reached with " +
                                std::to_string(bits.size() - consumed) + " bits unconsumed");
        std::vector<Entry> pool = hc_pool(lm, ids, p);
        if (pool.empty()) throw CapacityError("hc_encode: empty candidate pool");
        if (pool.size() == 1) {  // forced token, no branching capacity
            ids.push_back(pool[0].first);
            continue;
        }
        int node = build_huffman(pool, nodes);
        while (nodes[static_cast<size_t>(node)].token < 0) {
            uint8_t bit = 0;  // exhausted payload pads along the 0-path
            if (consumed < bits.size()) bit = bits.bits[consumed++];
            node = bit ? nodes[static_cast<size_t>(node)].right
                       : nodes[static_cast<size_t>(node)].left;
        }
        ids.push_back(nodes[static_cast<size_t>(node)].token);
    }
    greedy_tail(lm, ids, p);
    return finish_record(lm, ids, bits.size(), Coder::HC, domain);
}

BitString hc_decode(const NGramLM& lm, const TokenSeq& tokens, size_t payload_len,
                    const CoderParams& params) {
    CoderParams p = params;
    p.coder = Coder::HC;
    p.validate();

    BitString out;
    std::vector<int32_t> ids;
    std::vector<HuffNode> nodes;
    for (const auto& tok : tokens) {
        if (out.size() >= payload_len) break;
        std::vector<Entry> pool = hc_pool(lm, ids, p);
        int32_t id = lm.id_of(tok);
        bool in_pool = std::any_of(pool.begin(), pool.end(),
                                   [id](const Entry& e) { return e.first == id; });
        if (!in_pool)
            throw DesyncError("hc_decode: token '" + tok + "' outside candidate pool");
        if (pool.size() > 1) {
            int node = build_huffman(pool, nodes);
            // Read the path to the observed leaf.
            while (nodes[static_cast<size_t>(node)].token < 0) {
                int zero = nodes[static_cast<size_t>(node)].left;
                bool in_zero = false;
                // Leaf membership by tie bounds is not available; walk the subtree.
                std::vector<int> stack{zero};
                while (!stack.empty()) {
                    int n = stack.back();
                    stack.pop_back();
                    const HuffNode& hn = nodes[static_cast<size_t>(n)];
                    if (hn.token == id) {
                        in_zero = true;
                        break;
                    }
                    if (hn.token < 0) {
                        stack.push_back(hn.left);
                        stack.push_back(hn.right);
                    }
                }
                out.bits.push_back(in_zero ? 0 : 1);
                node = in_zero ? zero : nodes[static_cast<size_t>(node)].right;
            }
        }
        ids.push_back(id);
    }
    if (out.size() < payload_len)
        throw DesyncError("hc_decode: ran out of tokens with " +
                          std::to_string(payload_len - out.size()) + " bits missing");
    out.bits.resize(payload_len);
    return out;
}

// ---------------------------------------------------------------------------
// Arithmetic coding
//
// Embedding runs the standard integer arithmetic DEcoder against the payload
// interpreted as a zero-padded binary fraction: each step partitions the
// current interval proportionally to the candidate distribution and emits the
// token whose sub-interval contains the fraction. Extraction is the mirror
// ENcoder: replaying the narrowing from the observed tokens re-settles the
// payload bits. Renormalization is the textbook E1/E2/E3 scheme with explicit
// underflow (pending-bit) handling, so round trips are exact in integers.

namespace {

struct AcState {
    uint64_t low = 0;
    uint64_t high = 0;  // inclusive
    uint64_t top = 0;
    uint64_t quarter = 0;
    int precision = 0;

    explicit AcState(int precision_bits)
        : high((uint64_t{1} << precision_bits) - 1),
          top(uint64_t{1} << (precision_bits - 1)),
          quarter(uint64_t{1} << (precision_bits - 2)),
          precision(precision_bits) {}
};

// Frequency table at scale 2^freq_bits over the payload pool, canonical order.
// Every entry stays >= 1; rounding remainders go to the most probable token.
std::vector<uint64_t> quantize_freqs(const std::vector<Entry>& pool, int freq_bits) {
    const uint64_t scale = uint64_t{1} << freq_bits;
    if (pool.size() > scale)
        throw ParamError("ac: candidate pool larger than 2^precision frequency scale");
    double mass = 0.0;
    for (const auto& e : pool) mass += e.second;
    std::vector<uint64_t> f(pool.size());
    int64_t diff = static_cast<int64_t>(scale);
    for (size_t i = 0; i < pool.size(); ++i) {
        double q = pool[i].second / mass * static_cast<double>(scale);
        f[i] = std::max<uint64_t>(1, static_cast<uint64_t>(q));
        diff -= static_cast<int64_t>(f[i]);
    }
    if (diff > 0) {
        f[0] += static_cast<uint64_t>(diff);
    } else {
        while (diff < 0) {
            bool any = false;
            for (size_t i = pool.size(); i-- > 0 && diff < 0;) {
                if (f[i] > 1) {
                    uint64_t take = std::min<uint64_t>(f[i] - 1, static_cast<uint64_t>(-diff));
                    f[i] -= take;
                    diff += static_cast<int64_t>(take);
                    any = true;
                }
            }
            if (!any) throw ParamError("ac: cannot normalize frequency table");
        }
    }
    return f;
}

int ac_freq_bits(int precision_bits) { return std::min(24, precision_bits - 2); }

// Sub-interval of entry k within [low, high] given cumulative frequencies.
std::pair<uint64_t, uint64_t> ac_subinterval(const AcState& st, const std::vector<uint64_t>& cum,
                                             size_t k, int freq_bits) {
    const unsigned __int128 width = static_cast<unsigned __int128>(st.high - st.low) + 1;
    uint64_t lo = st.low + static_cast<uint64_t>((width * cum[k]) >> freq_bits);
    uint64_t hi = st.low + static_cast<uint64_t>((width * cum[k + 1]) >> freq_bits) - 1;
    return {lo, hi};
}

}  // namespace

TextRecord ac_encode(const NGramLM& lm, const BitString& bits, const CoderParams& params,
                     const std::string& domain) {
    CoderParams p = params;
    p.coder = Coder::AC;
    p.validate();
    const int freq_bits = ac_freq_bits(p.precision_bits);

    AcState st(p.precision_bits);
    // The payload as a binary fraction, windowed to precision_bits. Padding
    // past the payload alternates 1,0,1,... instead of using zeros: a zero
    // tail makes the fraction exactly dyadic, and the interval can then
    // straddle that boundary forever without settling the last bits. The pad
    // only steers post-payload token choices; the settled prefix that
    // extraction recovers is the payload either way.
    uint64_t value = 0;
    size_t bitpos = 0;
    size_t pad_index = 0;
    auto next_payload_bit = [&]() -> uint64_t {
        if (bitpos < bits.size()) return bits.bits[bitpos++];
        return (pad_index++ % 2) == 0 ? 1 : 0;
    };
    for (int i = 0; i < p.precision_bits; ++i) value = (value << 1) | next_payload_bit();

    std::vector<int32_t> ids;
    size_t settled = 0;
    size_t pending = 0;
    while (settled < bits.size()) {
        if (static_cast<int>(ids.size()) >= p.max_len)
            throw CapacityError("ac_encode: max_len reached before payload settled");
        std::vector<Entry> pool = payload_pool(lm.next_dist(ids));
        if (pool.empty()) throw CapacityError("ac_encode: empty candidate pool");
        std::vector<uint64_t> f = quantize_freqs(pool, freq_bits);
        std::vector<uint64_t> cum(f.size() + 1, 0);
        for (size_t i = 0; i < f.size(); ++i) cum[i + 1] = cum[i] + f[i];

        // Locate the sub-interval containing the fraction.
        size_t k = 0;
        {
            size_t lo = 0, hi = f.size() - 1;
            while (lo < hi) {
                size_t mid = (lo + hi) / 2;
                auto [slo, shi] = ac_subinterval(st, cum, mid, freq_bits);
                (void)slo;
                if (value <= shi)
                    hi = mid;
                else
                    lo = mid + 1;
            }
            k = lo;
        }
        auto [slo, shi] = ac_subinterval(st, cum, k, freq_bits);
        st.low = slo;
        st.high = shi;
        ids.push_back(pool[k].first);

        // Renormalize; every resolved E1/E2 settles one output bit plus any
        // pending underflow bits.
        for (;;) {
            if (st.high < st.top) {
                settled += 1 + pending;
                pending = 0;
            } else if (st.low >= st.top) {
                settled += 1 + pending;
                pending = 0;
                st.low -= st.top;
                st.high -= st.top;
                value -= st.top;
            } else if (st.low >= st.quarter && st.high < st.top + st.quarter) {
                ++pending;
                st.low -= st.quarter;
                st.high -= st.quarter;
                value -= st.quarter;
            } else {
                break;
            }
            st.low <<= 1;
            st.high = (st.high << 1) | 1;
            value = (value << 1) | next_payload_bit();
        }
    }
    greedy_tail(lm, ids, p);
    return finish_record(lm, ids, bits.size(), Coder::AC, domain);
}

BitString ac_decode(const NGramLM& lm, const TokenSeq& tokens, size_t payload_len,
                    const CoderParams& params) {
    CoderParams p = params;
    p.coder = Coder::AC;
    p.validate();
    const int freq_bits = ac_freq_bits(p.precision_bits);

    AcState st(p.precision_bits);
    BitString out;
    size_t pending = 0;
    auto settle = [&](uint8_t bit) {
        out.bits.push_back(bit);
        for (; pending > 0; --pending) out.bits.push_back(static_cast<uint8_t>(1 - bit));
    };

    std::vector<int32_t> ids;
    for (const auto& tok : tokens) {
        if (out.size() >= payload_len) break;
        std::vector<Entry> pool = payload_pool(lm.next_dist(ids));
        int32_t id = lm.id_of(tok);
        size_t k = pool.size();
        for (size_t i = 0; i < pool.size(); ++i) {
            if (pool[i].first == id) {
                k = i;
                break;
            }
        }
        if (k == pool.size())
            throw DesyncError("ac_decode: token '" + tok + "' outside candidate pool");
        std::vector<uint64_t> f = quantize_freqs(pool, freq_bits);
        std::vector<uint64_t> cum(f.size() + 1, 0);
        for (size_t i = 0; i < f.size(); ++i) cum[i + 1] = cum[i] + f[i];
        auto [slo, shi] = ac_subinterval(st, cum, k, freq_bits);
        st.low = slo;
        st.high = shi;
        ids.push_back(id);

        for (;;) {
            if (st.high < st.top) {
                settle(0);
            } else if (st.low >= st.top) {
                settle(1);
                st.low -= st.top;
                st.high -= st.top;
            } else if (st.low >= st.quarter && st.high < st.top + st.quarter) {
                ++pending;
                st.low -= st.quarter;
                st.high -= st.quarter;
            } else {
                break;
            }
            st.low <<= 1;
            st.high = (st.high << 1) | 1;
        }
    }
    if (out.size() < payload_len)
        throw DesyncError("ac_decode: interval prefix shorter than payload (" +
                          std::to_string(out.size()) + " of " + std::to_string(payload_len) +
                          " bits)");
    out.bits.resize(payload_len);
    return out;
}

// ---------------------------------------------------------------------------
// Adaptive dynamic grouping

namespace {

// Greedy balanced bipartition of canonically sorted entries: walk items in
// descending-probability order, assign each to the lighter group (ties to the
// group holding the canonical-first token). Bit 0 selects that first group.
std::pair<std::vector<Entry>, std::vector<Entry>> adg_bipartition(const std::vector<Entry>& group) {
    std::vector<Entry> a, b;
    double mass_a = 0.0, mass_b = 0.0;
    for (const auto& e : group) {
        if (mass_a <= mass_b) {
            a.push_back(e);
            mass_a += e.second;
        } else {
            b.push_back(e);
            mass_b += e.second;
        }
    }
    return {std::move(a), std::move(b)};
}

bool adg_contains(const std::vector<Entry>& group, int32_t id) {
    return std::any_of(group.begin(), group.end(),
                       [id](const Entry& e) { return e.first == id; });
}

}  // namespace

TextRecord adg_encode(const NGramLM& lm, const BitString& bits, const CoderParams& params,
                      const std::string& domain) {
    CoderParams p = params;
    p.coder = Coder::ADG;
    p.validate();

    std::vector<int32_t> ids;
    size_t consumed = 0;
    while (consumed < bits.size()) {
        if (static_cast<int>(ids.size()) >= p.max_len)
            throw CapacityError("adg_encode: max_len reached with " +
                                std::to_string(bits.size() - consumed) + " bits unconsumed");
        std::vector<Entry> group = payload_pool(lm.next_dist(ids));
        if (group.empty()) throw CapacityError("adg_encode: empty candidate pool");
        while (group.size() > 1 && consumed < bits.size()) {
            auto [a, b] = adg_bipartition(group);
            group = bits.bits[consumed++] ? std::move(b) : std::move(a);
        }
        // Singleton, or payload exhausted: canonical-first resolves ambiguity.
        ids.push_back(group.front().first);
    }
    greedy_tail(lm, ids, p);
    return finish_record(lm, ids, bits.size(), Coder::ADG, domain);
}

BitString adg_decode(const NGramLM& lm, const TokenSeq& tokens, size_t payload_len,
                     const CoderParams& params) {
    CoderParams p = params;
    p.coder = Coder::ADG;
    p.validate();

    BitString out;
    std::vector<int32_t> ids;
    for (const auto& tok : tokens) {
        if (out.size() >= payload_len) break;
        std::vector<Entry> group = payload_pool(lm.next_dist(ids));
        int32_t id = lm.id_of(tok);
        if (!adg_contains(group, id))
            throw DesyncError("adg_decode: token '" + tok + "' outside candidate pool");
        while (group.size() > 1 && out.size() < payload_len) {
            auto [a, b] = adg_bipartition(group);
            if (adg_contains(a, id)) {
                out.bits.push_back(0);
                group = std::move(a);
            } else {
                out.bits.push_back(1);
                group = std::move(b);
            }
        }
        ids.push_back(id);
    }
    if (out.size() < payload_len)
        throw DesyncError("adg_decode: ran out of tokens with " +
                          std::to_string(payload_len - out.size()) + " bits missing");
    out.bits.resize(payload_len);
    return out;
}

TextRecord stego_encode(const NGramLM& lm, const BitString& bits, const CoderParams& params,
                        const std::string& domain) {
    switch (params.coder) {
        case Coder::HC: return hc_encode(lm, bits, params, domain);
        case Coder::AC: return ac_encode(lm, bits, params, domain);
        case Coder::ADG: return adg_encode(lm, bits, params, domain);
    }
    throw ParamError("stego_encode: invalid coder");
}

BitString stego_decode(const NGramLM& lm, const TokenSeq& tokens, size_t payload_len,
                       const CoderParams& params) {
    switch (params.coder) {
        case Coder::HC: return hc_decode(lm, tokens, payload_len, params);
        case Coder::AC: return ac_decode(lm, tokens, payload_len, params);
        case Coder::ADG: return adg_decode(lm, tokens, payload_len, params);
    }
    throw ParamError("stego_decode: invalid coder");
}

}  // namespace reed
