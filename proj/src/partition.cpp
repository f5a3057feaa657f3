#include "abscope/partition.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace abscope {

Partition::Partition(std::vector<int> parts) : parts_(std::move(parts)) {
    if (std::any_of(parts_.begin(), parts_.end(), [](int p) { return p < 1; })) {
        throw std::invalid_argument("Partition: parts must be >= 1");
    }
    std::sort(parts_.begin(), parts_.end(), std::greater<>());
}

int Partition::total() const { return std::accumulate(parts_.begin(), parts_.end(), 0); }

int Partition::multiplicity(int value) const {
    return static_cast<int>(std::count(parts_.begin(), parts_.end(), value));
}

std::string Partition::to_string() const {
    std::string out;
    for (std::size_t i = 0; i < parts_.size(); ++i) {
        if (i) out += '-';
        out += std::to_string(parts_[i]);
    }
    return out;
}

std::vector<Partition> partitions_of(int n) {
    if (n < 0) {
        throw std::invalid_argument("partitions_of: n must be >= 0");
    }
    std::vector<Partition> out;
    std::vector<int> current;
    // Depth-first with the largest admissible part first yields reverse-lex order.
    std::function<void(int, int)> recurse = [&](int remaining, int max_part) {
        if (remaining == 0) {
            out.emplace_back(current);
            return;
        }
        for (int part = std::min(remaining, max_part); part >= 1; --part) {
            current.push_back(part);
            recurse(remaining - part, part);
            current.pop_back();
        }
    };
    recurse(n, n);
    return out;
}

}  // namespace abscope
