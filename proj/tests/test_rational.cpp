#include <stdexcept>

#include "doctest.h"
#include "psim/rational.hpp"

using psim::Rational;

TEST_CASE("rational normalization and comparison") {
    CHECK(Rational(12, 2) == Rational(6));
    CHECK(Rational(2, 4) == Rational(1, 2));
    CHECK(Rational(-2, 4) == Rational(-1, 2));
    CHECK(Rational(1, -2) == Rational(-1, 2));
    CHECK(Rational(1, 3) < Rational(1, 2));
    CHECK(Rational(5, 3) > Rational(3, 2));
    CHECK(Rational(7, 7) == Rational(1));
    CHECK_THROWS_AS(Rational(1, 0), std::invalid_argument);
}

TEST_CASE("rational arithmetic stays exact") {
    Rational d(12, 5);
    CHECK(d * Rational(5) == Rational(12));
    CHECK((Rational(1, 3) + Rational(1, 6)) == Rational(1, 2));
    CHECK((Rational(1) - Rational(1, 10)) == Rational(9, 10));
    CHECK((Rational(12) / Rational(5)) == Rational(12, 5));
}

TEST_CASE("floor and ceil") {
    CHECK(Rational(12, 5).floor() == 2);
    CHECK(Rational(12, 5).ceil() == 3);
    CHECK(Rational(12, 6).floor() == 2);
    CHECK(Rational(12, 6).ceil() == 2);
    CHECK(Rational(-7, 2).floor() == -4);
    CHECK(Rational(-7, 2).ceil() == -3);
    CHECK(Rational(0).floor() == 0);
}

TEST_CASE("decimal parsing is exact") {
    CHECK(psim::rational_from_decimal("0.1") == Rational(1, 10));
    CHECK(psim::rational_from_decimal("0.25") == Rational(1, 4));
    CHECK(psim::rational_from_decimal("2") == Rational(2));
    CHECK(psim::rational_from_decimal("1.5") == Rational(3, 2));
    CHECK(psim::rational_from_decimal("-0.5") == Rational(-1, 2));
}

TEST_CASE("string rendering") {
    CHECK(Rational(1, 6).str() == "1/6");
    CHECK(Rational(4).str() == "4");
}
