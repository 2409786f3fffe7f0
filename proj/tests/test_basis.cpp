#include <catch2/catch_amalgamated.hpp>

#include <bit>

#include "ethladder/basis.hpp"

using ethladder::build_sector_basis;
using ethladder::sector_error;

TEST_CASE("sector dimensions are binomial coefficients") {
    CHECK(build_sector_basis(2, 0).dim() == 2);
    CHECK(build_sector_basis(8, 0).dim() == 70);
    CHECK(build_sector_basis(8, 2).dim() == 56);
    CHECK(build_sector_basis(11, 1).dim() == 462);
    CHECK(build_sector_basis(14, 0).dim() == 3432);
    CHECK(build_sector_basis(14, 2).dim() == 3003);
    CHECK(build_sector_basis(5, 5).dim() == 1);
    CHECK(build_sector_basis(5, -5).dim() == 1);
}

TEST_CASE("states are sorted, unique, and carry the right magnetization") {
    const auto basis = build_sector_basis(9, 3);
    CHECK(basis.n_up() == 6);
    for (std::size_t i = 0; i < basis.states.size(); ++i) {
        CHECK(std::popcount(basis.states[i]) == 6);
        if (i > 0) CHECK(basis.states[i - 1] < basis.states[i]);
    }
}

TEST_CASE("index_of inverts the enumeration") {
    const auto basis = build_sector_basis(10, 0);
    for (int i = 0; i < basis.dim(); ++i)
        CHECK(basis.index_of(basis.states[i]) == i);

    // configs outside the sector are not found
    CHECK(basis.index_of(0) == -1);
    CHECK(basis.index_of((1u << 10) - 1) == -1);
}

TEST_CASE("invalid sectors are rejected") {
    CHECK_THROWS_AS(build_sector_basis(0, 0), sector_error);
    CHECK_THROWS_AS(build_sector_basis(63, 1), sector_error);
    CHECK_THROWS_AS(build_sector_basis(4, 6), sector_error);
    CHECK_THROWS_AS(build_sector_basis(4, -6), sector_error);
    // parity: two_sz must match n_sites mod 2
    CHECK_THROWS_AS(build_sector_basis(4, 1), sector_error);
    CHECK_THROWS_AS(build_sector_basis(5, 0), sector_error);
}
