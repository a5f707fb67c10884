#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "blr/aligned.hpp"
#include "blr/dataset.hpp"

namespace blr {

/// Which forward rule a set of real-valued parameters was trained under.
enum class Representation : std::uint8_t { dense = 0, binary = 1 };

std::string to_string(Representation r);
Representation parse_representation(const std::string& s);

inline constexpr std::size_t kBitsPerWord = 32;

/// Throws InvalidArgument unless dim is a positive multiple of 32.
void check_dim(std::size_t dim);

/// Real-valued factorization model: r_ui = u_u . i_i + b_u + b_i.
///
/// Factor rows are stored contiguously (row-major, 64-byte aligned base).
/// Because dim is a multiple of 32, every row starts on a 128-byte boundary.
class DenseModel {
public:
    DenseModel() = default;
    /// All parameters zero-initialized.
    DenseModel(std::size_t dim, std::size_t num_users, std::size_t num_items,
               Representation mode = Representation::dense);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t num_users() const noexcept { return num_users_; }
    std::size_t num_items() const noexcept { return num_items_; }
    Representation mode() const noexcept { return mode_; }
    void set_mode(Representation mode) noexcept { mode_ = mode; }

    std::span<float> user_factors(Index u) { return {user_factors_.data() + offset(u, num_users_), dim_}; }
    std::span<const float> user_factors(Index u) const {
        return {user_factors_.data() + offset(u, num_users_), dim_};
    }
    std::span<float> item_factors(Index i) { return {item_factors_.data() + offset(i, num_items_), dim_}; }
    std::span<const float> item_factors(Index i) const {
        return {item_factors_.data() + offset(i, num_items_), dim_};
    }

    std::span<float> all_user_factors() noexcept { return user_factors_; }
    std::span<const float> all_user_factors() const noexcept { return user_factors_; }
    std::span<float> all_item_factors() noexcept { return item_factors_; }
    std::span<const float> all_item_factors() const noexcept { return item_factors_; }
    std::span<float> user_bias() noexcept { return user_bias_; }
    std::span<const float> user_bias() const noexcept { return user_bias_; }
    std::span<float> item_bias() noexcept { return item_bias_; }
    std::span<const float> item_bias() const noexcept { return item_bias_; }

    /// True when every parameter is finite.
    bool is_finite() const;

    bool operator==(const DenseModel&) const = default;

private:
    std::size_t offset(Index r, std::size_t rows) const;

    std::size_t dim_ = 0;
    std::size_t num_users_ = 0;
    std::size_t num_items_ = 0;
    Representation mode_ = Representation::dense;
    AlignedVector<float> user_factors_;
    AlignedVector<float> item_factors_;
    AlignedVector<float> user_bias_;
    AlignedVector<float> item_bias_;
};

/// Binarized model: sign bits packed into 32-bit words plus per-row L1-mean
/// scales. Bit j of word w encodes element 32w + j; a set bit means +1.
class PackedModel {
public:
    PackedModel() = default;
    PackedModel(std::size_t dim, std::size_t num_users, std::size_t num_items);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t words_per_vec() const noexcept { return dim_ / kBitsPerWord; }
    std::size_t num_users() const noexcept { return num_users_; }
    std::size_t num_items() const noexcept { return num_items_; }

    std::span<std::uint32_t> user_bits(Index u);
    std::span<const std::uint32_t> user_bits(Index u) const;
    std::span<std::uint32_t> item_bits(Index i);
    std::span<const std::uint32_t> item_bits(Index i) const;

    std::span<std::uint32_t> all_user_bits() noexcept { return user_bits_; }
    std::span<const std::uint32_t> all_user_bits() const noexcept { return user_bits_; }
    std::span<std::uint32_t> all_item_bits() noexcept { return item_bits_; }
    std::span<const std::uint32_t> all_item_bits() const noexcept { return item_bits_; }
    std::span<float> user_scales() noexcept { return user_scales_; }
    std::span<const float> user_scales() const noexcept { return user_scales_; }
    std::span<float> item_scales() noexcept { return item_scales_; }
    std::span<const float> item_scales() const noexcept { return item_scales_; }
    std::span<float> user_bias() noexcept { return user_bias_; }
    std::span<const float> user_bias() const noexcept { return user_bias_; }
    std::span<float> item_bias() noexcept { return item_bias_; }
    std::span<const float> item_bias() const noexcept { return item_bias_; }

    bool operator==(const PackedModel&) const = default;

private:
    std::size_t dim_ = 0;
    std::size_t num_users_ = 0;
    std::size_t num_items_ = 0;
    AlignedVector<std::uint32_t> user_bits_;
    AlignedVector<std::uint32_t> item_bits_;
    AlignedVector<float> user_scales_;
    AlignedVector<float> item_scales_;
    AlignedVector<float> user_bias_;
    AlignedVector<float> item_bias_;
};

/// u_u . i_i + b_u + b_i.
float predict_dense(const DenseModel& model, Index u, Index i);

/// Elementwise sign into {-1, +1}; zero maps to +1.
std::vector<float> sign_vec(std::span<const float> v);

/// Mean absolute value, (1/n) * ||v||_1. Zero for the zero vector.
float scale_factor(std::span<const float> v);

/// beta_u * alpha_i * (sign(u_u) . sign(i_i)) + b_u + b_i evaluated with
/// floats in {-1, +1}. This is the training-time forward for binary models.
float predict_binary_float(const DenseModel& model, Index u, Index i);

/// Forward rule selected by the model's mode flag.
float predict(const DenseModel& model, Index u, Index i);

/// Packs the sign of every row and records its scale; biases are copied.
PackedModel binarize(const DenseModel& model);

// Model file: magic `BLRM`, version u32, kind u8, dim u32, num_users u32,
// num_items u32, then the parameter arrays. Little-endian throughout.
inline constexpr std::uint32_t kModelFormatVersion = 1;

enum class ModelKind : std::uint8_t {
    dense = 0,
    packed = 1,
    /// Real-valued parameters trained with the binary forward rule.
    dense_binary_trained = 2,
};

using AnyModel = std::variant<DenseModel, PackedModel>;

void save_model(const DenseModel& model, std::ostream& out);
void save_model(const PackedModel& model, std::ostream& out);
AnyModel load_model(std::istream& in);
DenseModel load_dense_model(std::istream& in);
PackedModel load_packed_model(std::istream& in);

void save_model_file(const AnyModel& model, const std::string& path);
AnyModel load_model_file(const std::string& path);

}  // namespace blr
