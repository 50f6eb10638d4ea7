#pragma once

#include <cstdint>
#include <vector>

#include "seqrec/error.hpp"
#include "seqrec/ingest.hpp"

namespace seqrec {

// Synthetic interaction logs with Zipf popularity and planted taste
// communities, the stand-in for production traffic at desk scale. Items are
// assigned to communities round-robin so every community spans the
// popularity range.
struct SynthConfig {
    std::size_t n_items = 2000;
    std::size_t n_users = 5000;
    std::size_t views_min = 12;
    std::size_t views_max = 40;
    double zipf_exponent = 1.1;
    std::size_t n_communities = 20;
    double add_to_cart_prob = 0.8;  // cart drawn from the user's community, else global
    std::uint64_t seed = 1;
};

// Each user browses in sessions: views mix the global Zipf distribution with
// the user's community, every session ends with one add-to-cart event, and
// timestamps increase strictly per user. Deterministic under the seed.
std::vector<EventRecord> generate_events(const SynthConfig& config);

}  // namespace seqrec
