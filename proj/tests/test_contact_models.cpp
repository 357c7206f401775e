#include <random>

#include "catch_amalgamated.hpp"
#include "forceframe/contact_models.hpp"
#include "forceframe/environment.hpp"

using namespace forceframe;
using Catch::Approx;

namespace {

ContactScenario patch(double a = 0.02, double b = 0.01, double k_n = 1e6, double k_t1 = 0.0, double k_t2 = 0.0) {
    ContactScenario s;
    s.kind = ContactKind::winkler_patch;
    s.a = a;
    s.b = b;
    s.k_n = k_n;
    s.k_t1 = k_t1;
    s.k_t2 = k_t2;
    return s;
}

// Closed-form moments of a uniform elliptical density:
// area pi a b, int x^2 = pi a^3 b / 4, int y^2 = pi a b^3 / 4.
Vec6 analytic_uniform_diagonal(const ContactScenario& s) {
    const double pi = std::numbers::pi;
    const double area = pi * s.a * s.b;
    const double ix2 = pi * s.a * s.a * s.a * s.b / 4.0;
    const double iy2 = pi * s.a * s.b * s.b * s.b / 4.0;
    Vec6 d;
    d << s.k_t1 * area, s.k_t2 * area, s.k_n * area, s.k_n * iy2, s.k_n * ix2, s.k_t2 * ix2 + s.k_t1 * iy2;
    return d;
}

double offdiag_max(const Mat6& k) {
    Mat6 o = k;
    o.diagonal().setZero();
    return o.cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("gauss-legendre rule integrates polynomials exactly") {
    const auto rule = detail::gauss_legendre(8);
    double w = 0.0, x14 = 0.0;
    for (int i = 0; i < 8; ++i) {
        w += rule.weights[i];
        x14 += rule.weights[i] * std::pow(rule.nodes[i], 14);
    }
    CHECK(w == Approx(2.0).epsilon(1e-14));
    CHECK(x14 == Approx(2.0 / 15.0).epsilon(1e-13));
}

TEST_CASE("uniform winkler patch matches closed-form moments") {
    const auto s = patch();
    const Mat6 k = assemble_winkler_stiffness(s);
    CHECK(k(2, 2) == Approx(628.3185307179587).epsilon(1e-9));
    CHECK(k(3, 3) == Approx(1.5707963267948967e-2).epsilon(1e-9));
    const Vec6 d = analytic_uniform_diagonal(s);
    for (int i = 2; i < 6; ++i)
        if (d(i) > 0) CHECK(std::abs(k(i, i) - d(i)) <= 1e-9 * d(i));
    CHECK(offdiag_max(k) <= 1e-8 * k.diagonal().maxCoeff());
}

TEST_CASE("parabolic density keeps total stiffness and lowers second moments") {
    auto s = patch();
    s.profile = DensityProfile::parabolic;
    const Mat6 k = winkler_stiffness_geometric(s);
    const double pi = std::numbers::pi;
    // int 2(1 - r^2) r^3 dr = 1/6 against 1/4 for uniform
    CHECK(k(2, 2) == Approx(s.k_n * pi * s.a * s.b).epsilon(1e-9));
    CHECK(k(3, 3) == Approx(s.k_n * pi * s.a * s.b * s.b * s.b / 6.0).epsilon(1e-9));
    CHECK(k(4, 4) == Approx(s.k_n * pi * s.a * s.a * s.a * s.b / 6.0).epsilon(1e-9));
}

TEST_CASE("coupling blocks vanish for symmetric patches") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> len(0.002, 0.05), dens(1e4, 1e8), frac(0.0, 1.0);
    for (int k = 0; k < 40; ++k) {
        const double kn = dens(rng);
        auto s = patch(len(rng), len(rng), kn, frac(rng) * kn, frac(rng) * kn);
        if (k % 2) s.profile = DensityProfile::parabolic;
        const Mat6 m = winkler_stiffness_geometric(s);
        CHECK(m.topRightCorner<3, 3>().cwiseAbs().maxCoeff() <= 1e-8 * m.diagonal().maxCoeff());
        CHECK(offdiag_max(m) <= 1e-8 * m.diagonal().maxCoeff());
        if (s.profile == DensityProfile::uniform) {
            const Vec6 d = analytic_uniform_diagonal(s);
            auto part = spectral_partition(m);
            std::vector<double> expected(d.data(), d.data() + 6), got(part.eigenvalues.data(), part.eigenvalues.data() + 6);
            std::sort(expected.begin(), expected.end());
            std::sort(got.begin(), got.end());
            for (int i = 0; i < 6; ++i) CHECK(std::abs(got[i] - expected[i]) <= 1e-6 * expected.back());
        }
    }
}

TEST_CASE("quadrature precondition") {
    CHECK_THROWS_AS(winkler_stiffness_geometric(patch(), 16), PreconditionViolation);
    ContactScenario wall;
    CHECK_THROWS_AS(winkler_stiffness_geometric(wall), PreconditionViolation);
    auto bad = patch();
    bad.a = 0.0;
    CHECK_THROWS_AS(winkler_stiffness_geometric(bad), PreconditionViolation);
}

TEST_CASE("spectral partition") {
    Vec6 d;
    d << 0, 0, 1000, 0, 0, 0;
    const auto p = spectral_partition(d.asDiagonal().toDenseMatrix(), 1.0);
    REQUIRE(p.constraint_indices.size() == 1);
    CHECK(std::abs(p.eigenvectors.col(p.constraint_indices[0])(2)) == Approx(1.0));
    CHECK(p.admissible_indices.size() == 5);

    const auto all = spectral_partition(Mat6::Identity() * 1e6, 1.0);
    CHECK(all.constraint_indices.size() == 6);

    Mat6 asym = Mat6::Identity();
    asym(0, 1) = 0.5;
    CHECK_THROWS_AS(spectral_partition(asym), NotSymmetric);
    Mat6 neg = Mat6::Identity();
    neg(5, 5) = -1.0;
    CHECK_THROWS_AS(spectral_partition(neg), NotPSD);
}

TEST_CASE("winkler patch partition needs the length-normalized spectrum") {
    const Mat6 k = winkler_stiffness_geometric(patch());
    // Raw: the rotational eigenvalues (N m/rad) sit far below 1.
    const auto raw = spectral_partition(k, 1.0);
    CHECK(raw.constraint_indices.size() == 1);
    // In N/m units the patch constrains z and both tilts.
    const auto scaled = spectral_partition(k, 1.0, MetricScale(0.1));
    REQUIRE(scaled.constraint_indices.size() == 3);
    Vec6 weight = Vec6::Zero();
    for (int i : scaled.constraint_indices) weight += scaled.eigenvectors.col(i).cwiseAbs2();
    CHECK(weight(2) == Approx(1.0));
    CHECK(weight(3) == Approx(1.0));
    CHECK(weight(4) == Approx(1.0));
}

TEST_CASE("spectral reconstruction and orthonormality on random PSD matrices") {
    std::mt19937_64 rng(22);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int k = 0; k < 100; ++k) {
        Mat6 a;
        for (int i = 0; i < 36; ++i) a(i) = n(rng);
        const Mat6 m = a * a.transpose() * 100.0;
        const auto p = spectral_partition(m);
        const Mat6 rec = p.eigenvectors * p.eigenvalues.asDiagonal() * p.eigenvectors.transpose();
        CHECK((rec - m).norm() <= 1e-9 * m.norm());
        CHECK((p.eigenvectors.transpose() * p.eigenvectors - Mat6::Identity()).cwiseAbs().maxCoeff() <= 1e-9);
        for (int i = 1; i < 6; ++i) CHECK(p.eigenvalues(i) <= p.eigenvalues(i - 1));
        CHECK(p.constraint_indices.size() + p.admissible_indices.size() == 6);
    }
}

TEST_CASE("unified basis diagnostics") {
    auto s = patch();
    s.ground_truth_frame = rot_z(0.4) * rot_x(0.3);
    const Mat6 k = assemble_winkler_stiffness(s);
    CHECK(verify_unified_basis(k, s.ground_truth_frame).max_offdiag_over_max_diag < 1e-8);
    const auto off = verify_unified_basis(k, s.ground_truth_frame * rot_z(deg2rad(30)));
    // The tilt couplings are tiny next to k_zz in raw units; only the
    // scale-free ratio exposes the misalignment.
    CHECK(off.max_offdiag_over_max_diag < 1e-2);
    CHECK(off.max_offdiag_ratio > 1e-2);
    CHECK(verify_unified_basis(k, s.ground_truth_frame).max_offdiag_ratio < 1e-8);

    const Mat6 iso = Mat6::Identity() * 5e3;
    CHECK(verify_unified_basis(iso, rot_y(1.1) * rot_z(-0.4)).max_offdiag_over_max_diag < 1e-10);
}

TEST_CASE("compliance response is co-axial") {
    Vec6 d;
    d << 0, 0, 1000, 0, 0, 0;
    const Mat6 k = d.asDiagonal();
    const Vec6 x = compliance_response(k, Wrench({0, 0, 10}, Vec3::Zero()));
    CHECK(x(2) == Approx(0.01).epsilon(1e-12));
    CHECK(x.norm() == Approx(0.01).epsilon(1e-12));
    CHECK_THROWS_AS(compliance_response(k, Wrench({1, 0, 0}, Vec3::Zero())), UnconstrainedDirection);

    std::mt19937_64 rng(23);
    std::normal_distribution<double> n(0.0, 1.0);
    Mat6 a;
    for (int i = 0; i < 36; ++i) a(i) = n(rng);
    const Mat6 q = Eigen::HouseholderQR<Mat6>(a).householderQ();
    Vec6 lam;
    lam << 500, 200, 80, 30, 0, 0;
    const Mat6 kk = q * lam.asDiagonal() * q.transpose();
    const Vec6 y = compliance_response(kk, Wrench::from_vector(5.0 * q.col(0)));
    CHECK(std::abs(y.normalized().dot(q.col(0))) >= 1 - 1e-9);
    CHECK(y.norm() == Approx(0.01).epsilon(1e-9));

    // pseudo-inverse consistency on the row space
    for (int t = 0; t < 50; ++t) {
        Vec6 c;
        for (int i = 0; i < 6; ++i) c(i) = n(rng);
        const Vec6 xr = q.leftCols<4>() * (q.leftCols<4>().transpose() * c);
        CHECK((compliance_response(kk, Wrench::from_vector(kk * xr)) - xr).norm() <= 1e-9 * xr.norm());
    }
}

TEST_CASE("spring wall follows Hooke and Coulomb") {
    ContactScenario s;
    s.kind = ContactKind::spring_wall;
    s.wall_stiffness = 1e4;
    s.mu = 0.5;
    const ContactEnvironment env(s);
    const auto rest = env.respond(Pose(Rotation::Identity(), Vec3(0, 0, 0.002)), Twist::zero());
    CHECK(rest.total.linear.isApprox(Vec3(0, 0, 20.0), 1e-12));
    CHECK(rest.in_contact);

    const auto slide = env.respond(Pose(Rotation::Identity(), Vec3(0, 0, 0.001)), Twist({0.05, 0, 0}, Vec3::Zero()));
    CHECK(slide.total.linear.isApprox(Vec3(5.0, 0, 10.0), 1e-12));
    CHECK(rad2deg(std::atan2(slide.total.linear.x(), slide.total.linear.z())) == Approx(26.56505117707799).epsilon(1e-12));
    // robot-applied friction does positive work on the environment: it dissipates
    CHECK(power(slide.friction, Twist({0.05, 0, 0}, Vec3::Zero())) > 0.0);

    const auto free = env.respond(Pose(Rotation::Identity(), Vec3(0, 0, -0.01)), Twist({0.05, 0, 0}, Vec3::Zero()));
    CHECK(free.total.vector().norm() == 0.0);
    CHECK_FALSE(free.in_contact);
}

TEST_CASE("scenario validation") {
    ContactScenario s;
    s.mu = -0.1;
    CHECK_THROWS_AS(s.validate(), PreconditionViolation);
    CHECK(parse_contact_kind("peg_channel") == ContactKind::peg_channel);
    CHECK_FALSE(parse_contact_kind("nope"));
}
