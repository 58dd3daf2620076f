#pragma once

#include <cstdint>
#include <vector>

namespace transnet {

/// Inclusive frame range [start, end], 0-based.
struct Interval {
    std::int64_t start = 0;
    std::int64_t end = 0;

    std::int64_t length() const { return end - start + 1; }
    bool overlaps(const Interval& other) const { return start <= other.end && other.start <= end; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Sorted, disjoint intervals. Used for both shot lists and transition lists.
using IntervalList = std::vector<Interval>;

/// Throws DataError unless every interval is non-empty and non-negative and
/// the list is sorted with no two intervals sharing a frame.
void validate_interval_list(const IntervalList& list, const char* what);

}  // namespace transnet
