#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace blr {

/// Dense 0-based user or item index.
using Index = std::uint32_t;
using RawId = std::int64_t;

/// Bidirectional raw id <-> dense index map, populated in first-appearance order.
class IdMap {
public:
    Index add(RawId raw);
    std::optional<Index> find(RawId raw) const;
    RawId raw(Index dense) const { return to_raw_.at(dense); }
    std::size_t size() const noexcept { return to_raw_.size(); }

private:
    std::vector<RawId> to_raw_;
    std::unordered_map<RawId, Index> to_dense_;
};

struct IdMaps {
    IdMap users;
    IdMap items;
};

/// Deduplicated implicit-feedback (user, item) pairs stored as parallel arrays.
///
/// Construction validates index ranges and rejects duplicate pairs. Sets
/// produced by `split` share the parent's id maps and entity counts, so their
/// dense ranges need not be fully populated.
class InteractionSet {
public:
    InteractionSet() = default;
    InteractionSet(std::vector<Index> users, std::vector<Index> items, std::size_t num_users,
                   std::size_t num_items, std::shared_ptr<const IdMaps> id_maps = nullptr);

    std::size_t size() const noexcept { return users_.size(); }
    bool empty() const noexcept { return users_.empty(); }
    std::size_t num_users() const noexcept { return num_users_; }
    std::size_t num_items() const noexcept { return num_items_; }

    std::span<const Index> user_ids() const noexcept { return users_; }
    std::span<const Index> item_ids() const noexcept { return items_; }

    /// Null for sets loaded from the binary interaction format.
    const std::shared_ptr<const IdMaps>& id_maps() const noexcept { return id_maps_; }

private:
    std::vector<Index> users_;
    std::vector<Index> items_;
    std::size_t num_users_ = 0;
    std::size_t num_items_ = 0;
    std::shared_ptr<const IdMaps> id_maps_;
};

enum class RatingsFormat { dat, csv };

struct ParseOptions {
    RatingsFormat format = RatingsFormat::dat;
    /// When set, ratings strictly below the threshold are dropped. Off by
    /// default: every rating counts as a positive interaction.
    std::optional<double> min_rating;
};

/// Parses MovieLens `user::item::rating::timestamp` lines (or the comma
/// separated equivalent, with an optional header row).
///
/// Throws ParseError carrying the 1-based line number on malformed input and
/// DataError on empty input.
InteractionSet parse_movielens(std::istream& in, const ParseOptions& options = {});

struct SplitSpec {
    double train_fraction = 0.8;
    double test_fraction = 0.1;
    double validation_fraction = 0.1;
    std::uint64_t seed = 42;

    void validate() const;
};

struct SplitResult {
    InteractionSet train;
    InteractionSet test;
    InteractionSet validation;
};

/// Random interaction-level partition. Part sizes are
/// round(train_fraction * N), round(test_fraction * N), and the remainder.
SplitResult split(const InteractionSet& interactions, const SplitSpec& spec);

/// Per-user sorted item sets S_u^+. The complement is never materialized.
class PositiveSets {
public:
    PositiveSets() = default;
    explicit PositiveSets(const InteractionSet& interactions);

    std::size_t num_users() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
    std::size_t num_items() const noexcept { return num_items_; }

    std::span<const Index> items(Index user) const;
    bool contains(Index user, Index item) const;
    std::size_t count(Index user) const { return items(user).size(); }

private:
    std::vector<std::size_t> offsets_;
    std::vector<Index> items_;
    std::size_t num_items_ = 0;
};

inline PositiveSets positive_sets(const InteractionSet& interactions) {
    return PositiveSets(interactions);
}

/// Binary interaction file: magic `BLRI`, version u32, num_users u32,
/// num_items u32, num_pairs u64, then num_pairs x (u32 user, u32 item).
inline constexpr std::uint32_t kInteractionFormatVersion = 1;

void save_interactions(const InteractionSet& interactions, std::ostream& out);
InteractionSet load_interactions(std::istream& in);

}  // namespace blr
