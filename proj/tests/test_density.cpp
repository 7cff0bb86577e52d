#include "bhc/density.hpp"

#include <complex>

#include "bhc/linalg.hpp"
#include "doctest.h"

using namespace bhc;

TEST_CASE("pure Fock state occupies a single diagonal block") {
    const auto sp = build_fock_space(3, 2);
    const auto rho = DensityMatrix::fock(sp, fock_from_digits("110"));
    CHECK(rho.trace() == doctest::Approx(1.0));
    CHECK(rho.purity() == doctest::Approx(1.0));
    CHECK(rho.hermiticity_defect() == 0.0);
    CHECK(rho.diagonal_blocks_only());
    CHECK(rho.blocks().size() == 1);
    CHECK(rho.population(fock_from_digits("110")) == doctest::Approx(1.0));
    CHECK(rho.population(fock_from_digits("200")) == doctest::Approx(0.0));
    CHECK(rho.element(fock_from_digits("110"), fock_from_digits("011")) ==
          std::complex<double>(0.0, 0.0));
}

TEST_CASE("pure superposition across sectors fills the cross blocks") {
    const auto sp = build_fock_space(1, 1);
    Eigen::VectorXcd psi(2);
    psi << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    const auto rho = DensityMatrix::pure(sp, psi);
    CHECK(rho.blocks().size() == 4);
    CHECK(!rho.diagonal_blocks_only());
    CHECK(rho.trace() == doctest::Approx(1.0));
    CHECK(rho.purity() == doctest::Approx(1.0));
    const auto c = rho.element(fock_from_digits("0"), fock_from_digits("1"));
    CHECK(c.real() == doctest::Approx(0.5));
    CHECK(rho.min_eigenvalue() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(rho.dense().rows() == 2);
    CHECK(std::abs(rho.dense()(0, 1) - c) < 1e-15);
}

TEST_CASE("mixtures have reduced purity") {
    const auto sp = build_fock_space(2, 1);
    auto rho = DensityMatrix::fock(sp, fock_from_digits("10"));
    const auto other = DensityMatrix::fock(sp, fock_from_digits("01"));
    rho.scale(0.5);
    const int k = sp.sector_of(1);
    rho.block(k, k) += 0.5 * *other.find_block(k, k);
    CHECK(rho.trace() == doctest::Approx(1.0));
    CHECK(rho.purity() == doctest::Approx(0.5));
    CHECK_NOTHROW(rho.check_invariants());
}

TEST_CASE("maximally mixed sector") {
    const auto sp = build_fock_space(3, 2);
    const auto rho = DensityMatrix::maximally_mixed_sector(sp, 2);
    CHECK(rho.trace() == doctest::Approx(1.0));
    CHECK(rho.purity() == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("invariant checks flag broken states") {
    const auto sp = build_fock_space(2, 1);

    SUBCASE("trace drift") {
        auto rho = DensityMatrix::fock(sp, fock_from_digits("10"));
        rho.scale(1.0 + 1e-4);
        CHECK_THROWS_AS(rho.check_invariants(), NumericError);
    }
    SUBCASE("hermiticity defect") {
        auto rho = DensityMatrix::fock(sp, fock_from_digits("10"));
        const int k = sp.sector_of(1);
        rho.block(k, k)(0, 1) = std::complex<double>(0.0, 1e-6);
        CHECK_THROWS_AS(rho.check_invariants(), NumericError);
    }
    SUBCASE("negative eigenvalue") {
        auto rho = DensityMatrix::fock(sp, fock_from_digits("10"));
        const int k = sp.sector_of(1);
        rho.block(k, k)(1, 1) = -2e-6;
        rho.block(k, k)(0, 0) = 1.0 + 2e-6;
        CHECK_THROWS_AS(rho.check_invariants(), NumericError);
    }
    SUBCASE("tiny negativity is tolerated") {
        auto rho = DensityMatrix::fock(sp, fock_from_digits("10"));
        const int k = sp.sector_of(1);
        rho.block(k, k)(1, 1) = -1e-9;
        rho.block(k, k)(0, 0) = 1.0 + 1e-9;
        CHECK_NOTHROW(rho.check_invariants());
    }
}

TEST_CASE("constructors reject malformed input") {
    const auto sp = build_fock_space(2, 1);
    Eigen::VectorXcd bad(3);
    bad << 1.0, 1.0, 1.0;
    CHECK_THROWS_AS(DensityMatrix::pure(sp, bad), std::invalid_argument);
    Eigen::VectorXcd unnorm = Eigen::VectorXcd::Zero(sp.dim());
    unnorm(0) = 0.5;
    CHECK_THROWS_AS(DensityMatrix::pure(sp, unnorm), std::invalid_argument);
    CHECK_THROWS_AS(DensityMatrix::fock(sp, fock_from_digits("20")), std::invalid_argument);
    CHECK_THROWS_AS(DensityMatrix::maximally_mixed_sector(sp, 5), std::invalid_argument);
}
