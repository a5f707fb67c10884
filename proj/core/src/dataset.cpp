#include "blr/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <unordered_set>

#include "binary_io.hpp"
#include "blr/error.hpp"

namespace blr {

namespace {

constexpr std::array<char, 4> kInteractionMagic{'B', 'L', 'R', 'I'};

std::uint64_t pair_key(Index user, Index item) {
    return (static_cast<std::uint64_t>(user) << 32) | item;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line, std::string_view sep) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            fields.push_back(trim(line.substr(start)));
            break;
        }
        fields.push_back(trim(line.substr(start, pos - start)));
        start = pos + sep.size();
    }
    return fields;
}

template <typename T>
bool parse_number(std::string_view field, T& value) {
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, value);
    return ec == std::errc{} && ptr == end;
}

}  // namespace

Index IdMap::add(RawId raw) {
    auto [it, inserted] = to_dense_.try_emplace(raw, static_cast<Index>(to_raw_.size()));
    if (inserted) to_raw_.push_back(raw);
    return it->second;
}

std::optional<Index> IdMap::find(RawId raw) const {
    auto it = to_dense_.find(raw);
    if (it == to_dense_.end()) return std::nullopt;
    return it->second;
}

InteractionSet::InteractionSet(std::vector<Index> users, std::vector<Index> items, std::size_t num_users,
                               std::size_t num_items, std::shared_ptr<const IdMaps> id_maps)
    : users_(std::move(users)),
      items_(std::move(items)),
      num_users_(num_users),
      num_items_(num_items),
      id_maps_(std::move(id_maps)) {
    if (users_.size() != items_.size()) {
        throw InvalidArgument("interaction arrays differ in length");
    }
    std::vector<std::uint64_t> keys(users_.size());
    for (std::size_t k = 0; k < users_.size(); ++k) {
        if (users_[k] >= num_users_ || items_[k] >= num_items_) {
            throw InvalidArgument("interaction " + std::to_string(k) + " has an out-of-range index");
        }
        keys[k] = pair_key(users_[k], items_[k]);
    }
    std::sort(keys.begin(), keys.end());
    if (std::adjacent_find(keys.begin(), keys.end()) != keys.end()) {
        throw InvalidArgument("duplicate (user, item) pair");
    }
}

InteractionSet parse_movielens(std::istream& in, const ParseOptions& options) {
    const std::string_view sep = options.format == RatingsFormat::dat ? "::" : ",";
    auto maps = std::make_shared<IdMaps>();
    std::vector<Index> users;
    std::vector<Index> items;
    std::unordered_set<std::uint64_t> seen;

    std::string line;
    std::size_t line_no = 0;
    bool first_record = true;
    while (std::getline(in, line)) {
        ++line_no;
        const auto view = trim(line);
        if (view.empty()) continue;
        const auto fields = split_fields(view, sep);

        if (first_record && options.format == RatingsFormat::csv) {
            first_record = false;
            RawId probe = 0;
            if (!parse_number(fields[0], probe)) continue;  // header row
        }
        first_record = false;

        if (fields.size() != 4) {
            throw ParseError(line_no, "expected 4 fields, got " + std::to_string(fields.size()));
        }
        RawId raw_user = 0;
        RawId raw_item = 0;
        double rating = 0.0;
        std::int64_t timestamp = 0;
        if (!parse_number(fields[0], raw_user)) throw ParseError(line_no, "invalid user id");
        if (!parse_number(fields[1], raw_item)) throw ParseError(line_no, "invalid item id");
        if (!parse_number(fields[2], rating)) throw ParseError(line_no, "invalid rating");
        if (!parse_number(fields[3], timestamp)) throw ParseError(line_no, "invalid timestamp");

        if (options.min_rating && rating < *options.min_rating) continue;

        const Index u = maps->users.add(raw_user);
        const Index i = maps->items.add(raw_item);
        if (seen.insert(pair_key(u, i)).second) {
            users.push_back(u);
            items.push_back(i);
        }
    }
    if (in.bad()) throw DataError("read error on ratings stream");
    if (users.empty()) throw DataError("no interactions in input");

    const auto num_users = maps->users.size();
    const auto num_items = maps->items.size();
    return InteractionSet(std::move(users), std::move(items), num_users, num_items, std::move(maps));
}

void SplitSpec::validate() const {
    for (double f : {train_fraction, test_fraction, validation_fraction}) {
        if (!(f > 0.0) || !std::isfinite(f)) {
            throw InvalidArgument("split fractions must be positive");
        }
    }
    if (std::abs(train_fraction + test_fraction + validation_fraction - 1.0) > 1e-9) {
        throw InvalidArgument("split fractions must sum to 1");
    }
}

SplitResult split(const InteractionSet& interactions, const SplitSpec& spec) {
    spec.validate();
    const std::size_t n = interactions.size();
    if (n == 0) throw DataError("cannot split an empty interaction set");

    const auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
    const auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(n)));
    if (n_train == 0 || n_test == 0 || n_train + n_test >= n) {
        throw InvalidArgument("split of " + std::to_string(n) + " interactions leaves an empty part");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(spec.seed);
    std::shuffle(order.begin(), order.end(), rng);

    const auto users = interactions.user_ids();
    const auto items = interactions.item_ids();
    auto take = [&](std::size_t begin, std::size_t end) {
        std::vector<std::size_t> picked(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                        order.begin() + static_cast<std::ptrdiff_t>(end));
        std::sort(picked.begin(), picked.end());
        std::vector<Index> u(picked.size());
        std::vector<Index> i(picked.size());
        for (std::size_t k = 0; k < picked.size(); ++k) {
            u[k] = users[picked[k]];
            i[k] = items[picked[k]];
        }
        return InteractionSet(std::move(u), std::move(i), interactions.num_users(), interactions.num_items(),
                              interactions.id_maps());
    };

    return SplitResult{take(0, n_train), take(n_train, n_train + n_test), take(n_train + n_test, n)};
}

PositiveSets::PositiveSets(const InteractionSet& interactions) : num_items_(interactions.num_items()) {
    const auto users = interactions.user_ids();
    const auto items = interactions.item_ids();
    offsets_.assign(interactions.num_users() + 1, 0);
    for (Index u : users) ++offsets_[u + 1];
    std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());

    items_.resize(users.size());
    std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
    for (std::size_t k = 0; k < users.size(); ++k) items_[cursor[users[k]]++] = items[k];
    for (std::size_t u = 0; u + 1 < offsets_.size(); ++u) {
        std::sort(items_.begin() + static_cast<std::ptrdiff_t>(offsets_[u]),
                  items_.begin() + static_cast<std::ptrdiff_t>(offsets_[u + 1]));
    }
}

std::span<const Index> PositiveSets::items(Index user) const {
    if (static_cast<std::size_t>(user) + 1 >= offsets_.size()) {
        throw InvalidArgument("user index out of range");
    }
    return std::span<const Index>(items_).subspan(offsets_[user], offsets_[user + 1] - offsets_[user]);
}

bool PositiveSets::contains(Index user, Index item) const {
    const auto row = items(user);
    return std::binary_search(row.begin(), row.end(), item);
}

void save_interactions(const InteractionSet& interactions, std::ostream& out) {
    io::write_magic(out, kInteractionMagic);
    io::write_pod<std::uint32_t>(out, kInteractionFormatVersion);
    io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(interactions.num_users()));
    io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(interactions.num_items()));
    io::write_pod<std::uint64_t>(out, interactions.size());
    const auto users = interactions.user_ids();
    const auto items = interactions.item_ids();
    std::vector<std::uint32_t> pairs(2 * users.size());
    for (std::size_t k = 0; k < users.size(); ++k) {
        pairs[2 * k] = users[k];
        pairs[2 * k + 1] = items[k];
    }
    io::write_array<std::uint32_t>(out, pairs);
    io::check_stream(out);
}

InteractionSet load_interactions(std::istream& in) {
    io::expect_magic(in, kInteractionMagic);
    const auto version = io::read_pod<std::uint32_t>(in, "version");
    if (version != kInteractionFormatVersion) {
        throw FormatError(FormatErrorKind::version_mismatch,
                          "unsupported interaction file version " + std::to_string(version));
    }
    const auto num_users = io::read_pod<std::uint32_t>(in, "num_users");
    const auto num_items = io::read_pod<std::uint32_t>(in, "num_items");
    const auto num_pairs = io::read_pod<std::uint64_t>(in, "num_pairs");
    if (num_pairs > (std::uint64_t{1} << 36)) {
        throw FormatError(FormatErrorKind::truncated, "implausible pair count");
    }
    std::vector<std::uint32_t> pairs(2 * num_pairs);
    io::read_array<std::uint32_t>(in, pairs, "pairs");

    std::vector<Index> users(num_pairs);
    std::vector<Index> items(num_pairs);
    for (std::size_t k = 0; k < num_pairs; ++k) {
        users[k] = pairs[2 * k];
        items[k] = pairs[2 * k + 1];
    }
    try {
        return InteractionSet(std::move(users), std::move(items), num_users, num_items);
    } catch (const InvalidArgument& e) {
        throw DataError(std::string("invalid interaction file: ") + e.what());
    }
}

}  // namespace blr
