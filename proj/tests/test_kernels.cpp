#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "gpgm/kernels.hpp"
#include "test_util.hpp"

using namespace gpgm;

namespace {
const SeKernelParams kParams{1.3, 0.7, 0.1};
}

TEST(SeKernel, ClosedFormValues) {
  const Vec2 a(0.2, -1.0);
  EXPECT_DOUBLE_EQ(kernel::se(kParams, a, a), 1.3 * 1.3);
  const Vec2 b = a + Vec2(0.7, 0.0);
  EXPECT_NEAR(kernel::se(kParams, a, b), 1.69 * std::exp(-0.5), 1e-15);
  EXPECT_NEAR(std::exp(-0.5), 0.60653, 1e-5);
}

TEST(SeKernel, SymmetricBoundedAndSeparable) {
  std::mt19937_64 rng(11);
  const auto pts = test::random_xy(rng, 400, -3, 3);
  for (std::size_t i = 0; i + 1 < pts.size(); i += 2) {
    const Vec2 &a = pts[i], &b = pts[i + 1];
    const double k = kernel::se(kParams, a, b);
    EXPECT_EQ(k, kernel::se(kParams, b, a));
    EXPECT_GT(k, 0.0);
    EXPECT_LT(k, kParams.signal_variance());
    const double sep = kParams.signal_variance() * kernel::se_1d(kParams, a.x(), b.x()) * kernel::se_1d(kParams, a.y(), b.y());
    EXPECT_NEAR(k, sep, 1e-12);
  }
}

TEST(SeKernel, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  const auto pts = test::random_xy(rng, 200, -1.5, 1.5);
  const double h = 1e-5 * kParams.length_scale;
  for (std::size_t i = 0; i + 1 < pts.size(); i += 2) {
    const Vec2 &a = pts[i], &b = pts[i + 1];
    const Vec2 g = kernel::se_grad_first(kParams, a, b);
    for (int d = 0; d < 2; ++d) {
      Vec2 e = Vec2::Zero();
      e[d] = h;
      const double fd = (kernel::se(kParams, a + e, b) - kernel::se(kParams, a - e, b)) / (2 * h);
      EXPECT_NEAR(g[d], fd, 1e-6 * std::max(std::abs(fd), 1e-3));
    }
    // Swapping the arguments flips the sign.
    EXPECT_LT((g + kernel::se_grad_first(kParams, b, a)).norm(), 1e-15);
  }
  EXPECT_EQ(kernel::se_grad_first(kParams, pts[0], pts[0]), Vec2::Zero());
}

TEST(SeKernel, GramIsSymmetricPositiveDefinite) {
  const std::vector<Vec2> one = {Vec2(0.5, 0.5)};
  EXPECT_DOUBLE_EQ(kernel::gram(kParams, one, one)(0, 0), 1.69);
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const auto xs = test::random_xy(rng, 50, 0, 2);
    Eigen::MatrixXd k = kernel::gram(kParams, xs, xs);
    EXPECT_TRUE(k == k.transpose());
    k.diagonal().array() += kParams.noise_variance();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
    EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(SeKernel, ParamsValidation) {
  EXPECT_THROW((SeKernelParams{0.0, 1.0, 1.0}.validate()), InvalidArgument);
  EXPECT_THROW((SeKernelParams{1.0, -1.0, 1.0}.validate()), InvalidArgument);
  EXPECT_THROW((SeKernelParams{1.0, 1.0, 0.0}.validate()), InvalidArgument);
  EXPECT_NO_THROW(kParams.validate());
}
