#include "blr/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "binary_io.hpp"
#include "blr/error.hpp"
#include "blr/kernels.hpp"
#include "detail.hpp"

namespace blr {

namespace {

constexpr std::array<char, 4> kModelMagic{'B', 'L', 'R', 'M'};

struct ModelHeader {
    ModelKind kind;
    std::uint32_t dim;
    std::uint32_t num_users;
    std::uint32_t num_items;
};

void write_header(std::ostream& out, const ModelHeader& h) {
    io::write_magic(out, kModelMagic);
    io::write_pod<std::uint32_t>(out, kModelFormatVersion);
    io::write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(h.kind));
    io::write_pod<std::uint32_t>(out, h.dim);
    io::write_pod<std::uint32_t>(out, h.num_users);
    io::write_pod<std::uint32_t>(out, h.num_items);
}

ModelHeader read_header(std::istream& in) {
    io::expect_magic(in, kModelMagic);
    const auto version = io::read_pod<std::uint32_t>(in, "version");
    if (version != kModelFormatVersion) {
        throw FormatError(FormatErrorKind::version_mismatch,
                          "unsupported model file version " + std::to_string(version));
    }
    const auto kind = io::read_pod<std::uint8_t>(in, "kind");
    if (kind > static_cast<std::uint8_t>(ModelKind::dense_binary_trained)) {
        throw FormatError(FormatErrorKind::wrong_kind, "unknown model kind " + std::to_string(kind));
    }
    ModelHeader h{static_cast<ModelKind>(kind), io::read_pod<std::uint32_t>(in, "dim"),
                  io::read_pod<std::uint32_t>(in, "num_users"), io::read_pod<std::uint32_t>(in, "num_items")};
    if (h.dim == 0 || h.dim % kBitsPerWord != 0) {
        throw FormatError(FormatErrorKind::truncated, "model header has invalid dim " + std::to_string(h.dim));
    }
    return h;
}

DenseModel read_dense_body(std::istream& in, const ModelHeader& h) {
    DenseModel m(h.dim, h.num_users, h.num_items,
                 h.kind == ModelKind::dense_binary_trained ? Representation::binary : Representation::dense);
    io::read_array(in, m.all_user_factors(), "user_factors");
    io::read_array(in, m.all_item_factors(), "item_factors");
    io::read_array(in, m.user_bias(), "user_bias");
    io::read_array(in, m.item_bias(), "item_bias");
    return m;
}

PackedModel read_packed_body(std::istream& in, const ModelHeader& h) {
    PackedModel m(h.dim, h.num_users, h.num_items);
    io::read_array(in, m.all_user_bits(), "user_bits");
    io::read_array(in, m.all_item_bits(), "item_bits");
    io::read_array(in, m.user_scales(), "user_scales");
    io::read_array(in, m.item_scales(), "item_scales");
    io::read_array(in, m.user_bias(), "user_bias");
    io::read_array(in, m.item_bias(), "item_bias");
    return m;
}

}  // namespace

std::string to_string(Representation r) { return r == Representation::dense ? "dense" : "binary"; }

Representation parse_representation(const std::string& s) {
    if (s == "dense") return Representation::dense;
    if (s == "binary") return Representation::binary;
    throw InvalidArgument("unknown representation '" + s + "'");
}

void check_dim(std::size_t dim) {
    if (dim == 0 || dim % kBitsPerWord != 0) {
        throw InvalidArgument("dimension must be a positive multiple of 32, got " + std::to_string(dim));
    }
}

DenseModel::DenseModel(std::size_t dim, std::size_t num_users, std::size_t num_items, Representation mode)
    : dim_(dim),
      num_users_(num_users),
      num_items_(num_items),
      mode_(mode),
      user_factors_(num_users * dim, 0.0f),
      item_factors_(num_items * dim, 0.0f),
      user_bias_(num_users, 0.0f),
      item_bias_(num_items, 0.0f) {
    check_dim(dim);
}

std::size_t DenseModel::offset(Index r, std::size_t rows) const {
    if (r >= rows) throw InvalidArgument("index " + std::to_string(r) + " out of range");
    return static_cast<std::size_t>(r) * dim_;
}

bool DenseModel::is_finite() const {
    auto finite = [](std::span<const float> v) {
        return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
    };
    return finite(user_factors_) && finite(item_factors_) && finite(user_bias_) && finite(item_bias_);
}

PackedModel::PackedModel(std::size_t dim, std::size_t num_users, std::size_t num_items)
    : dim_(dim),
      num_users_(num_users),
      num_items_(num_items),
      user_bits_(num_users * (dim / kBitsPerWord), 0u),
      item_bits_(num_items * (dim / kBitsPerWord), 0u),
      user_scales_(num_users, 0.0f),
      item_scales_(num_items, 0.0f),
      user_bias_(num_users, 0.0f),
      item_bias_(num_items, 0.0f) {
    check_dim(dim);
}

std::span<std::uint32_t> PackedModel::user_bits(Index u) {
    if (u >= num_users_) throw InvalidArgument("user index out of range");
    return {user_bits_.data() + static_cast<std::size_t>(u) * words_per_vec(), words_per_vec()};
}
std::span<const std::uint32_t> PackedModel::user_bits(Index u) const {
    if (u >= num_users_) throw InvalidArgument("user index out of range");
    return {user_bits_.data() + static_cast<std::size_t>(u) * words_per_vec(), words_per_vec()};
}
std::span<std::uint32_t> PackedModel::item_bits(Index i) {
    if (i >= num_items_) throw InvalidArgument("item index out of range");
    return {item_bits_.data() + static_cast<std::size_t>(i) * words_per_vec(), words_per_vec()};
}
std::span<const std::uint32_t> PackedModel::item_bits(Index i) const {
    if (i >= num_items_) throw InvalidArgument("item index out of range");
    return {item_bits_.data() + static_cast<std::size_t>(i) * words_per_vec(), words_per_vec()};
}

float predict_dense(const DenseModel& model, Index u, Index i) {
    const auto user = model.user_factors(u);
    const auto item = model.item_factors(i);
    return detail::dense_dot_unchecked(user.data(), item.data(), user.size()) + model.user_bias()[u] +
           model.item_bias()[i];
}

std::vector<float> sign_vec(std::span<const float> v) {
    std::vector<float> signs(v.size());
    std::transform(v.begin(), v.end(), signs.begin(), detail::sign_of);
    return signs;
}

float scale_factor(std::span<const float> v) {
    if (v.empty()) return 0.0f;
    double total = 0.0;
    for (float x : v) total += std::abs(static_cast<double>(x));
    return static_cast<float>(total / static_cast<double>(v.size()));
}

float predict_binary_float(const DenseModel& model, Index u, Index i) {
    const auto user = model.user_factors(u);
    const auto item = model.item_factors(i);
    return combine_binary(scale_factor(user), scale_factor(item), detail::sign_dot(sign_vec(user), item),
                          model.user_bias()[u], model.item_bias()[i]);
}

float predict(const DenseModel& model, Index u, Index i) {
    return model.mode() == Representation::binary ? predict_binary_float(model, u, i) : predict_dense(model, u, i);
}

PackedModel binarize(const DenseModel& model) {
    PackedModel packed(model.dim(), model.num_users(), model.num_items());
    auto pack_rows = [&](std::size_t rows, auto&& factors, auto&& bits, std::span<float> scales) {
        for (std::size_t r = 0; r < rows; ++r) {
            const auto row = factors(static_cast<Index>(r));
            const auto words = pack_bits(sign_vec(row)).words;
            std::copy(words.begin(), words.end(), bits(static_cast<Index>(r)).begin());
            scales[r] = scale_factor(row);
        }
    };
    pack_rows(
        model.num_users(), [&](Index u) { return model.user_factors(u); },
        [&](Index u) { return packed.user_bits(u); }, packed.user_scales());
    pack_rows(
        model.num_items(), [&](Index i) { return model.item_factors(i); },
        [&](Index i) { return packed.item_bits(i); }, packed.item_scales());
    std::copy(model.user_bias().begin(), model.user_bias().end(), packed.user_bias().begin());
    std::copy(model.item_bias().begin(), model.item_bias().end(), packed.item_bias().begin());
    return packed;
}

void save_model(const DenseModel& model, std::ostream& out) {
    write_header(out, {model.mode() == Representation::binary ? ModelKind::dense_binary_trained : ModelKind::dense,
                       static_cast<std::uint32_t>(model.dim()), static_cast<std::uint32_t>(model.num_users()),
                       static_cast<std::uint32_t>(model.num_items())});
    io::write_array(out, model.all_user_factors());
    io::write_array(out, model.all_item_factors());
    io::write_array(out, model.user_bias());
    io::write_array(out, model.item_bias());
    io::check_stream(out);
}

void save_model(const PackedModel& model, std::ostream& out) {
    write_header(out, {ModelKind::packed, static_cast<std::uint32_t>(model.dim()),
                       static_cast<std::uint32_t>(model.num_users()), static_cast<std::uint32_t>(model.num_items())});
    io::write_array(out, model.all_user_bits());
    io::write_array(out, model.all_item_bits());
    io::write_array(out, model.user_scales());
    io::write_array(out, model.item_scales());
    io::write_array(out, model.user_bias());
    io::write_array(out, model.item_bias());
    io::check_stream(out);
}

AnyModel load_model(std::istream& in) {
    const auto header = read_header(in);
    if (header.kind == ModelKind::packed) return read_packed_body(in, header);
    return read_dense_body(in, header);
}

DenseModel load_dense_model(std::istream& in) {
    auto model = load_model(in);
    if (auto* dense = std::get_if<DenseModel>(&model)) return std::move(*dense);
    throw FormatError(FormatErrorKind::wrong_kind, "expected a dense model file, found a packed model");
}

PackedModel load_packed_model(std::istream& in) {
    auto model = load_model(in);
    if (auto* packed = std::get_if<PackedModel>(&model)) return std::move(*packed);
    throw FormatError(FormatErrorKind::wrong_kind, "expected a packed model file, found a dense model");
}

void save_model_file(const AnyModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatErrorKind::io, "cannot open '" + path + "' for writing");
    std::visit([&](const auto& m) { save_model(m, out); }, model);
}

AnyModel load_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(FormatErrorKind::io, "cannot open model file '" + path + "'");
    return load_model(in);
}

}  // namespace blr
