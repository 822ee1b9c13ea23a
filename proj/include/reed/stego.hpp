#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "reed/corpus.hpp"
#include "reed/lm.hpp"

namespace reed {

struct BitString {
    std::vector<uint8_t> bits;  // each element 0 or 1

    size_t size() const { return bits.size(); }
    bool empty() const { return bits.empty(); }
    bool operator==(const BitString&) const = default;

    static BitString from_string(std::string_view s);  // "0101"
    std::string to_string() const;
    static BitString random(size_t n, uint64_t seed);
};

enum class Coder { HC, AC, ADG };

Coder coder_from_name(std::string_view name);  // "HC" | "AC" | "ADG"
std::string coder_name(Coder c);

struct CoderParams {
    Coder coder = Coder::HC;
    int pool_size = 16;       // HC: top-k candidate truncation, >= 2
    int precision_bits = 52;  // AC: fixed-point width, in [16, 62]
    int min_len = 1;          // greedy tail does not stop at <eos> before this
    int max_len = 256;

    void validate() const;  // throws ParamError
};

// Encoders return a stego record (label=1, payload_bits=|bits|). The payload
// phase draws candidates from the non-reserved tokens only; once the payload
// is embedded the sentence is finished greedily until <eos> or max_len.
// Throws CapacityError when max_len is hit with payload still pending.
TextRecord hc_encode(const NGramLM& lm, const BitString& bits, const CoderParams& params,
                     const std::string& domain = "");
TextRecord ac_encode(const NGramLM& lm, const BitString& bits, const CoderParams& params,
                     const std::string& domain = "");
TextRecord adg_encode(const NGramLM& lm, const BitString& bits, const CoderParams& params,
                      const std::string& domain = "");

// Decoders replay the encoder's candidate construction step by step and
// recover exactly payload_len bits. Throws DesyncError when an observed token
// falls outside the replayed candidate pool or the payload cannot be recovered.
BitString hc_decode(const NGramLM& lm, const TokenSeq& tokens, size_t payload_len,
                    const CoderParams& params);
BitString ac_decode(const NGramLM& lm, const TokenSeq& tokens, size_t payload_len,
                    const CoderParams& params);
BitString adg_decode(const NGramLM& lm, const TokenSeq& tokens, size_t payload_len,
                     const CoderParams& params);

// Dispatch on params.coder.
TextRecord stego_encode(const NGramLM& lm, const BitString& bits, const CoderParams& params,
                        const std::string& domain = "");
BitString stego_decode(const NGramLM& lm, const TokenSeq& tokens, size_t payload_len,
                       const CoderParams& params);

}  // namespace reed
