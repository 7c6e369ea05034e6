#include <doctest.h>

#include <cmath>
#include <numeric>

#include "lifecycle/errors.hpp"
#include "lifecycle/history.hpp"

using namespace lifecycle;

TEST_SUITE("history") {

TEST_CASE("lag j after k pushes returns the value pushed k - j steps... counted from the newest") {
    const LagGrid grid{10, 1.0};
    HistoryBuffer buf(grid, 0.0);
    for (int k = 1; k <= 37; ++k) {
        buf.push(static_cast<double>(k));
        // newest at lag index n_z; index n_z - m holds the value from m steps earlier
        for (std::size_t m = 0; m <= grid.n_z; ++m) {
            const double expected = k - static_cast<int>(m) >= 1 ? static_cast<double>(k - static_cast<int>(m)) : 0.0;
            CHECK(buf.at_lag(grid.n_z - m) == expected);
        }
        CHECK(buf.current() == static_cast<double>(k));
    }
}

TEST_CASE("running sum tracks pushes and resync agrees") {
    const LagGrid grid{7, 0.7};
    HistoryBuffer buf(grid, 0.5);
    for (int k = 0; k < 100; ++k) buf.push(std::sin(0.3 * k));
    const auto v = buf.values();
    const double direct = std::accumulate(v.begin(), v.end(), 0.0);
    CHECK(buf.sum() == doctest::Approx(direct).epsilon(1e-13));
    buf.resync_sum();
    CHECK(buf.sum() == doctest::Approx(direct).epsilon(1e-15));
}

TEST_CASE("weighted sum spans the wrap point") {
    const LagGrid grid{4, 1.0};
    HistoryBuffer buf(grid, std::vector<double>{1, 2, 3, 4, 5});
    buf.push(6);
    buf.push(7);
    // oldest first: 3 4 5 6 7
    const std::vector<double> w{1, 10, 100, 1000, 10000};
    CHECK(buf.weighted_sum(w) == 3 + 40 + 500 + 6000 + 70000);
    CHECK(buf.oldest() == 3);
    CHECK(buf.values() == std::vector<double>{3, 4, 5, 6, 7});
}

TEST_CASE("construction from values checks the size") {
    const LagGrid grid{4, 1.0};
    CHECK_THROWS_AS(HistoryBuffer(grid, std::vector<double>{1, 2, 3}), GridMismatch);
}

}  // TEST_SUITE
