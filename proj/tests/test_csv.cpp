#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

#include "ctoqw/csv.hpp"

using namespace ctoqw;

TEST_CASE("small tables")
{
    Table one{{"a"}, {}};
    one.add_row({1.5});
    CHECK(format_csv(one) == "a\n1.5\n");
    const Table empty{{"a", "b"}, {}};
    CHECK(format_csv(empty) == "a,b\n");
    CHECK(parse_csv("a,b\n").rows.empty());
    CHECK_THROWS_AS(one.add_row({1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("reals use 17 significant digits")
{
    CHECK(format_real(0.1) == "0.10000000000000001");
    CHECK(format_real(-2.0) == "-2");
    CHECK(format_real(-0.0) == "0");
    CHECK(format_real(1e300) == "1.0000000000000001e+300");
    CHECK(format_real(std::numeric_limits<double>::infinity()) == "inf");
    CHECK_THROWS_AS(format_real(std::nan("")), std::invalid_argument);
}

TEST_CASE("round trip of random finite tables")
{
    std::mt19937_64 gen(31);
    std::uniform_int_distribution<int> cols(1, 6), rows(0, 30), expo(-300, 300);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        Table t;
        const int c = cols(gen);
        for (int k = 0; k < c; ++k) t.header.push_back("col" + std::to_string(k));
        const int r = rows(gen);
        for (int i = 0; i < r; ++i) {
            std::vector<double> row;
            for (int k = 0; k < c; ++k) row.push_back(g(gen) * std::pow(10.0, expo(gen)));
            t.add_row(std::move(row));
        }
        const Table back = parse_csv(format_csv(t));
        CHECK(back.header == t.header);
        CHECK(back.rows == t.rows);
    }
}

TEST_CASE("quoted header fields")
{
    Table t{{"plain", "with,comma", "with \"quote\""}, {}};
    t.add_row({1, 2, 3});
    const std::string text = format_csv(t);
    CHECK(text.rfind("plain,\"with,comma\",\"with \"\"quote\"\"\"\n", 0) == 0);
    CHECK(parse_csv(text).header == t.header);
}

TEST_CASE("parse errors")
{
    CHECK_THROWS(parse_csv(""));
    CHECK_THROWS(parse_csv("a,b\n1\n"));
    CHECK_THROWS(parse_csv("a\nfoo\n"));
    CHECK_THROWS(parse_csv("a\nnan\n"));
    CHECK_THROWS(parse_csv("\"a\n"));
    CHECK(std::isinf(parse_csv("a\ninf\n").rows[0][0]));
    CHECK(parse_csv("a,b\r\n1,2\r\n").rows[0][1] == 2.0);
}
