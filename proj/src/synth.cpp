#include "seqrec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "seqrec/rng.hpp"

namespace seqrec {

namespace {

// Views mix the global popularity distribution with the user's community;
// the blend is fixed so community signal survives any zipf_exponent.
constexpr double kCommunityViewProb = 0.35;

// Sessions browse a neighborhood of an anchor member, not the whole
// community: offsets from the anchor decay geometrically along the
// community's popularity ring. This gives communities internal structure,
// so item embeddings form a manifold instead of collapsing onto a single
// direction.
constexpr std::size_t kNeighborhoodSpan = 10;
constexpr double kNeighborhoodDecay = 0.55;

struct ZipfTable {
    std::vector<double> cumulative;
    std::vector<ItemIndex> items;

    ItemIndex draw(Rng& rng) const {
        return items[draw_position(rng)];
    }

    std::size_t draw_position(Rng& rng) const {
        const double u = rng.next_double() * cumulative.back();
        const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
        return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()),
                                     items.size() - 1);
    }
};

ZipfTable zipf_over(const std::vector<ItemIndex>& items, double exponent) {
    ZipfTable table;
    table.items = items;
    table.cumulative.reserve(items.size());
    double acc = 0.0;
    for (std::size_t rank = 0; rank < items.size(); ++rank) {
        acc += std::pow(static_cast<double>(rank) + 1.0, -exponent);
        table.cumulative.push_back(acc);
    }
    return table;
}

// Anchor-relative draw on the community popularity ring.
ItemIndex neighborhood_draw(const std::vector<ItemIndex>& members, std::size_t anchor, Rng& rng) {
    const std::size_t span = std::min(kNeighborhoodSpan, members.size() - 1);
    std::size_t offset = 0;
    if (span > 0) {
        // geometric offset, capped at span
        while (offset < span && rng.next_double() < kNeighborhoodDecay) ++offset;
    }
    std::size_t pos = anchor;
    if (offset > 0) {
        const bool up = rng.next_double() < 0.5;
        pos = (anchor + (up ? offset : members.size() - offset)) % members.size();
    }
    return members[pos];
}

}  // namespace

std::vector<EventRecord> generate_events(const SynthConfig& config) {
    if (config.n_items == 0 || config.n_communities == 0 || config.n_items < config.n_communities) {
        fail(ErrorCode::InvalidArgument, "synth: need n_items >= n_communities >= 1");
    }
    if (config.n_users == 0) fail(ErrorCode::InvalidArgument, "synth: n_users must be >= 1");
    if (config.views_min == 0 || config.views_max < config.views_min) {
        fail(ErrorCode::InvalidArgument, "synth: views range must satisfy 1 <= min <= max");
    }
    if (!(config.zipf_exponent > 0.0)) fail(ErrorCode::InvalidArgument, "synth: zipf_exponent must be > 0");
    if (!(config.add_to_cart_prob > 0.0 && config.add_to_cart_prob <= 1.0)) {
        fail(ErrorCode::InvalidArgument, "synth: add_to_cart_prob must lie in (0, 1]");
    }

    // Item index doubles as popularity rank; communities are round-robin so
    // each one spans head and tail items. Within a community, members keep
    // their popularity order, so member j of community c is item j*C + c.
    std::vector<ItemIndex> all_items(config.n_items);
    for (std::size_t i = 0; i < config.n_items; ++i) all_items[i] = static_cast<ItemIndex>(i);
    const ZipfTable global = zipf_over(all_items, config.zipf_exponent);

    std::vector<std::vector<ItemIndex>> members(config.n_communities);
    for (std::size_t i = 0; i < config.n_items; ++i) {
        members[i % config.n_communities].push_back(static_cast<ItemIndex>(i));
    }
    std::vector<ZipfTable> anchor_tables(config.n_communities);
    for (std::size_t c = 0; c < config.n_communities; ++c) {
        anchor_tables[c] = zipf_over(members[c], config.zipf_exponent);
    }

    std::vector<EventRecord> events;
    events.reserve(config.n_users * (config.views_max + config.views_max / 4 + 1));

    const auto item_id = [](ItemIndex item) { return "i" + std::to_string(item); };

    for (std::size_t u = 0; u < config.n_users; ++u) {
        Rng rng(mix64(config.seed, u + 1));
        const std::size_t community = static_cast<std::size_t>(rng.next_below(config.n_communities));
        const std::vector<ItemIndex>& local = members[community];
        const ZipfTable& anchors = anchor_tables[community];
        const std::size_t n_views =
            static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(config.views_min),
                                                     static_cast<std::int64_t>(config.views_max)));
        const std::string user = "u" + std::to_string(u);

        std::int64_t t = rng.uniform_int(0, 5'000'000);
        std::size_t emitted = 0;
        while (emitted < n_views) {
            // each session browses around one anchor member of the community
            const std::size_t anchor = anchors.draw_position(rng);
            const std::size_t session_len =
                std::min<std::size_t>(static_cast<std::size_t>(rng.uniform_int(4, 8)), n_views - emitted);
            for (std::size_t v = 0; v < session_len; ++v) {
                t += rng.uniform_int(1'000, 60'000);
                const ItemIndex item = rng.next_double() < kCommunityViewProb
                                           ? neighborhood_draw(local, anchor, rng)
                                           : global.draw(rng);
                events.push_back(EventRecord{t, user, item_id(item), EventType::View});
                ++emitted;
            }
            t += rng.uniform_int(1'000, 60'000);
            const ItemIndex cart = rng.next_double() < config.add_to_cart_prob
                                       ? neighborhood_draw(local, anchor, rng)
                                       : global.draw(rng);
            events.push_back(EventRecord{t, user, item_id(cart), EventType::AddToCart});
            t += rng.uniform_int(1'000'000, 4'000'000);
        }
    }
    return events;
}

}  // namespace seqrec
