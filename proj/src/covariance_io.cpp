#include <algorithm>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

#include "fracweak/covariance.hpp"
#include "fracweak/errors.hpp"

namespace fracweak {

namespace {

constexpr char kMagic[4] = {'F', 'W', 'C', 'V'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw ConfigError("covariance dump: truncated input");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

void put_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) put<double>(out, m(i, j));
    }
}

Eigen::MatrixXd get_matrix(std::istream& in, Eigen::Index dim) {
    Eigen::MatrixXd m(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        for (Eigen::Index j = 0; j < dim; ++j) m(i, j) = get<double>(in);
    }
    return m;
}

}  // namespace

void write_bundle(std::ostream& out, const CovarianceBundle& bundle) {
    const SchemeSpec& scheme = bundle.scheme;
    out.write(kMagic, 4);
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(bundle.n()));
    put<std::uint8_t>(out, scheme.is_exact() ? 0 : 1);
    put<double>(out, scheme.hurst().value());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(scheme.kappa()));
    put<std::uint8_t>(out, scheme.is_exact() ? 0 : static_cast<std::uint8_t>(scheme.hybrid()->rule));
    put_matrix(out, bundle.full);
    put_matrix(out, bundle.lower);
    put<double>(out, bundle.jitter_used);
    if (!out) throw ConfigError("covariance dump: write failed");
}

BundleDump read_bundle(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw ConfigError("covariance dump: bad magic");
    BundleDump dump;
    dump.version = get<std::uint32_t>(in);
    if (dump.version != kVersion) throw ConfigError("covariance dump: unsupported version");
    dump.n = get<std::uint32_t>(in);
    dump.scheme_tag = get<std::uint8_t>(in);
    dump.hurst = get<double>(in);
    dump.kappa = get<std::uint32_t>(in);
    dump.rule = get<std::uint8_t>(in);
    const auto dim = static_cast<Eigen::Index>(2 * dump.n);
    dump.full = get_matrix(in, dim);
    dump.lower = get_matrix(in, dim);
    dump.jitter_used = get<double>(in);
    return dump;
}

}  // namespace fracweak
