#pragma once

#include <compare>
#include <string>
#include <vector>

namespace abscope {

/// Integer partition with parts stored non-increasing, e.g. 5 = 3+1+1 is {3,1,1}.
class Partition {
public:
    Partition() = default;
    /// Sorts the parts into canonical order; rejects non-positive parts.
    explicit Partition(std::vector<int> parts);

    const std::vector<int>& parts() const { return parts_; }
    int total() const;
    std::size_t length() const { return parts_.size(); }
    /// Number of parts equal to `value`.
    int multiplicity(int value) const;

    /// Dash-separated parts, "2-1-1".
    std::string to_string() const;

    // Reverse-lexicographic enumeration order: {3} < {2,1} < {1,1,1}.
    friend std::strong_ordering operator<=>(const Partition& a, const Partition& b) {
        return b.parts_ <=> a.parts_;
    }
    friend bool operator==(const Partition&, const Partition&) = default;

private:
    std::vector<int> parts_;
};

/// All partitions of n in reverse-lexicographic order ({n} first, {1,...,1} last).
std::vector<Partition> partitions_of(int n);

}  // namespace abscope
