#pragma once

// Environment stiffness synthesis from geometric contact models, spectral
// partition into constraint / admissible-motion subspaces, and the checks that
// a single spatial rotation diagonalizes the stiffness.

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Eigenvalues>

#include "forceframe/errors.hpp"
#include "forceframe/spatial.hpp"

namespace forceframe {

enum class ContactKind { winkler_patch, spring_wall, peg_channel, screw };

/// Radial shape of the Winkler stiffness densities over the ellipse.
/// `parabolic` is 2 (1 - r^2): same total stiffness as uniform, peaked center.
enum class DensityProfile { uniform, parabolic };

inline constexpr std::string_view to_string(ContactKind k) {
    switch (k) {
        case ContactKind::winkler_patch: return "winkler_patch";
        case ContactKind::spring_wall: return "spring_wall";
        case ContactKind::peg_channel: return "peg_channel";
        case ContactKind::screw: return "screw";
    }
    return "spring_wall";
}

inline std::optional<ContactKind> parse_contact_kind(std::string_view s) {
    for (auto k : {ContactKind::winkler_patch, ContactKind::spring_wall, ContactKind::peg_channel,
                   ContactKind::screw})
        if (s == to_string(k)) return k;
    return std::nullopt;
}

/// Geometric contact description. The geometric frame has z along the
/// robot-applied normal force (into the environment); for the peg channel x is
/// the insertion axis, for the screw z is the screw axis.
struct ContactScenario {
    ContactKind kind = ContactKind::spring_wall;

    double a = 0.02;   // patch semi-axis along geometric x (m)
    double b = 0.01;   // patch semi-axis along geometric y (m)
    double k_n = 1e6;  // normal stiffness density (N/m^3)
    double k_t1 = 0.0; // tangential density along x (N/m^3)
    double k_t2 = 0.0; // tangential density along y (N/m^3)
    DensityProfile profile = DensityProfile::uniform;

    double wall_stiffness = 1e4;     // spring wall normal / screw axial (N/m)
    double channel_stiffness = 1e4;  // peg and screw lateral (N/m)
    double engagement_length = 0.02; // peg / screw engagement (m)
    double mu = 0.0;                 // Coulomb coefficient
    double preload = 0.0;            // peg radial fit preload, total (N)

    Rotation ground_truth_frame = Rotation::Identity();
    Vec3 origin = Vec3::Zero();

    void validate() const {
        auto bad = [](double v) { return !std::isfinite(v) || v < 0.0; };
        if (bad(k_n) || bad(k_t1) || bad(k_t2) || bad(wall_stiffness) || bad(channel_stiffness) ||
            bad(engagement_length) || bad(preload))
            throw PreconditionViolation("contact stiffnesses must be finite and >= 0");
        if (bad(mu)) throw PreconditionViolation("friction coefficient must be >= 0");
        if (!(a > 0.0) || !(b > 0.0)) throw PreconditionViolation("patch semi-axes must be > 0");
        if (!is_rotation(ground_truth_frame)) throw PreconditionViolation("ground truth frame is not a rotation");
    }
};

namespace detail {

struct GaussRule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;
};

// Newton iteration on the Legendre recurrence.
inline GaussRule gauss_legendre(int n) {
    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            const double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        rule.nodes[i] = -z;
        rule.nodes[n - 1 - i] = z;
        rule.weights[i] = rule.weights[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
    return rule;
}

inline Mat3 skew(const Vec3& p) {
    Mat3 s;
    s << 0, -p.z(), p.y(), p.z(), 0, -p.x(), -p.y(), p.x(), 0;
    return s;
}

// K = \int_D G Kp G^T dA with G = [I; [p]x], p = (x, y, 0), over the ellipse
// mapped to polar coordinates (x, y) = (a r cos t, b r sin t).
inline Mat6 integrate_winkler(const ContactScenario& s, int n) {
    const GaussRule rule = gauss_legendre(n);
    Mat6 k = Mat6::Zero();
    for (int ir = 0; ir < n; ++ir) {
        const double r = 0.5 * (rule.nodes[ir] + 1.0);
        const double wr = 0.5 * rule.weights[ir];
        const double shape = s.profile == DensityProfile::uniform ? 1.0 : 2.0 * (1.0 - r * r);
        for (int it = 0; it < n; ++it) {
            const double t = std::numbers::pi * (rule.nodes[it] + 1.0);
            const double wt = std::numbers::pi * rule.weights[it];
            const Vec3 p(s.a * r * std::cos(t), s.b * r * std::sin(t), 0.0);
            const double da = s.a * s.b * r * wr * wt * shape;

            Eigen::Matrix<double, 6, 3> g;
            g.topRows<3>() = Mat3::Identity();
            g.bottomRows<3>() = skew(p);
            const Vec3 densities(s.k_t1, s.k_t2, s.k_n);
            k.noalias() += da * g * densities.asDiagonal() * g.transpose();
        }
    }
    return k;
}

}  // namespace detail

inline constexpr double kQuadratureTolerance = 1e-6;

/// Winkler patch stiffness in the geometric frame, with a doubling check.
inline Mat6 winkler_stiffness_geometric(const ContactScenario& s, int quadrature_n = 64) {
    if (s.kind != ContactKind::winkler_patch) throw PreconditionViolation("scenario is not a Winkler patch");
    if (quadrature_n < 32) throw PreconditionViolation("quadrature_n must be >= 32");
    s.validate();
    const Mat6 coarse = detail::integrate_winkler(s, quadrature_n);
    const Mat6 fine = detail::integrate_winkler(s, 2 * quadrature_n);
    const double scale = fine.norm();
    if (scale > 0.0 && (fine - coarse).norm() > kQuadratureTolerance * scale)
        throw QuadratureTooCoarse("doubling check exceeded " + std::to_string(kQuadratureTolerance));
    return fine;
}

/// Winkler patch stiffness rotated into the world frame by the scenario's
/// ground-truth frame.
inline Mat6 assemble_winkler_stiffness(const ContactScenario& s, int quadrature_n = 64) {
    const Mat6 phi = spatial_rotation(s.ground_truth_frame);
    return phi * winkler_stiffness_geometric(s, quadrature_n) * phi.transpose();
}

/// Elastic stiffness of any scenario kind, geometric frame.
inline Mat6 geometric_stiffness(const ContactScenario& s, int quadrature_n = 64) {
    s.validate();
    Vec6 d = Vec6::Zero();
    const double rot_lateral = s.channel_stiffness * s.engagement_length * s.engagement_length / 12.0;
    switch (s.kind) {
        case ContactKind::winkler_patch: return winkler_stiffness_geometric(s, quadrature_n);
        case ContactKind::spring_wall: d << 0, 0, s.wall_stiffness, 0, 0, 0; break;
        case ContactKind::peg_channel:
            d << 0, s.channel_stiffness, s.channel_stiffness, 0, rot_lateral, rot_lateral;
            break;
        case ContactKind::screw:
            d << s.channel_stiffness, s.channel_stiffness, s.wall_stiffness, rot_lateral, rot_lateral, 0;
            break;
    }
    return d.asDiagonal();
}

inline Mat6 world_stiffness(const ContactScenario& s, int quadrature_n = 64) {
    const Mat6 phi = spatial_rotation(s.ground_truth_frame);
    return phi * geometric_stiffness(s, quadrature_n) * phi.transpose();
}

struct SpectralPartition {
    Vec6 eigenvalues;   // descending
    Mat6 eigenvectors;  // columns, orthonormal
    double epsilon = 0.0;
    std::vector<int> constraint_indices;   // lambda > epsilon
    std::vector<int> admissible_indices;   // lambda <= epsilon
};

inline constexpr double kSymmetryTolerance = 1e-9;
inline constexpr double kPsdTolerance = 1e-9;
inline constexpr double kDefaultEpsilonFraction = 0.01;

/// Rescales rotational coordinates by rho so every eigenvalue is in N/m.
inline Mat6 length_normalized(const Mat6& k, const MetricScale& scale) {
    Vec6 d;
    d << 1, 1, 1, scale.rho, scale.rho, scale.rho;
    Vec6 inv = d.cwiseInverse();
    return inv.asDiagonal() * k * inv.asDiagonal();
}

/// Q Lambda Q^T with eigenvalues descending, split at epsilon. When epsilon is
/// not given it is 1% of the largest eigenvalue. When a metric scale is given
/// the decomposition is done on the length-normalized matrix.
inline SpectralPartition spectral_partition(const Mat6& k_in, std::optional<double> epsilon = std::nullopt,
                                            std::optional<MetricScale> scale = std::nullopt) {
    if (!k_in.allFinite()) throw NotSymmetric("stiffness has non-finite entries");
    const Mat6 k = scale ? length_normalized(k_in, *scale) : k_in;
    const double kmax = k.cwiseAbs().maxCoeff();
    if ((k - k.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance * kmax)
        throw NotSymmetric("stiffness matrix is not symmetric");

    Eigen::SelfAdjointEigenSolver<Mat6> solver(0.5 * (k + k.transpose()));
    SpectralPartition out;
    for (int i = 0; i < 6; ++i) {
        out.eigenvalues(i) = solver.eigenvalues()(5 - i);
        out.eigenvectors.col(i) = solver.eigenvectors().col(5 - i);
    }
    const double lmax = std::max(out.eigenvalues(0), 0.0);
    if (out.eigenvalues(5) < -kPsdTolerance * lmax - 1e-300)
        throw NotPSD("min eigenvalue " + std::to_string(out.eigenvalues(5)));

    out.epsilon = epsilon.value_or(kDefaultEpsilonFraction * lmax);
    for (int i = 0; i < 6; ++i)
        (out.eigenvalues(i) > out.epsilon ? out.constraint_indices : out.admissible_indices).push_back(i);
    return out;
}

struct BasisDiagnostics {
    /// max_{i != j} |K_ij| / sqrt(K_ii K_jj), scale-free. Pairs touching a
    /// numerically zero diagonal (<= 1e-9 max diag) contribute |K_ij| / max diag.
    double max_offdiag_ratio = 0.0;
    /// max |off-diagonal| / max |diagonal| on the raw matrix.
    double max_offdiag_over_max_diag = 0.0;
};

/// Conjugates k by diag(frame, frame) and reports how far from diagonal the
/// result is.
inline BasisDiagnostics verify_unified_basis(const Mat6& k, const Rotation& frame) {
    const Mat6 phi = spatial_rotation(frame);
    const Mat6 local = phi.transpose() * k * phi;
    const double dmax = local.diagonal().cwiseAbs().maxCoeff();
    BasisDiagnostics d;
    if (dmax == 0.0) return d;
    const double floor = kPsdTolerance * dmax;
    double offmax = 0.0;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
            if (i == j) continue;
            const double v = std::abs(local(i, j));
            offmax = std::max(offmax, v);
            const double kii = std::abs(local(i, i)), kjj = std::abs(local(j, j));
            const double r = (kii > floor && kjj > floor) ? v / std::sqrt(kii * kjj) : v / dmax;
            d.max_offdiag_ratio = std::max(d.max_offdiag_ratio, r);
        }
    d.max_offdiag_over_max_diag = offmax / dmax;
    return d;
}

inline constexpr double kNullSpaceTolerance = 1e-9;

/// Pseudo-inverse pose perturbation K^+ w. Throws when w pushes along a
/// direction the environment does not resist.
inline Vec6 compliance_response(const Mat6& k, const Wrench& applied) {
    Eigen::SelfAdjointEigenSolver<Mat6> solver(0.5 * (k + k.transpose()));
    const Vec6 w = applied.vector();
    const double lmax = std::max(solver.eigenvalues().maxCoeff(), 0.0);
    Vec6 x = Vec6::Zero();
    Vec6 in_range = Vec6::Zero();
    for (int i = 0; i < 6; ++i) {
        const double l = solver.eigenvalues()(i);
        if (l <= 1e-12 * lmax || l <= 0.0) continue;
        const Vec6 q = solver.eigenvectors().col(i);
        const double c = q.dot(w);
        x += (c / l) * q;
        in_range += c * q;
    }
    if ((w - in_range).norm() > kNullSpaceTolerance * std::max(w.norm(), 1e-300))
        throw UnconstrainedDirection("applied wrench has a component in the stiffness null space");
    return x;
}

}  // namespace forceframe
