#include "gnnstrat/stratify.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

namespace gnnstrat {

std::uint64_t DegreeHistogram::total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

DegreeHistogram degree_histogram(std::span<const std::uint32_t> degrees) {
    DegreeHistogram h;
    const std::uint32_t max_deg = degrees.empty() ? 0 : *std::max_element(degrees.begin(), degrees.end());
    h.counts.assign(degrees.empty() ? 0 : max_deg + 1, 0);
    for (std::uint32_t d : degrees) ++h.counts[d];
    return h;
}

void write_histogram_csv(std::ostream& out, const DegreeHistogram& hist) {
    out << "degree,count\n";
    for (std::size_t d = 0; d < hist.counts.size(); ++d) out << d << ',' << hist.counts[d] << '\n';
}

namespace {

__extension__ typedef unsigned __int128 u128;

/// Exact three-way comparison of a/b and c/d (b, d > 0) by continued-fraction expansion.
int compare_fractions(u128 a, u128 b, u128 c, u128 d) {
    bool flipped = false;
    while (true) {
        const u128 qa = a / b, qc = c / d;
        if (qa != qc) return (qa < qc) != flipped ? -1 : 1;
        a -= qa * b;
        c -= qc * d;
        if (a == 0 || c == 0) {
            if (a == c) return 0;
            return (a == 0) != flipped ? -1 : 1;
        }
        // a/b < c/d  <=>  b/a > d/c
        std::swap(a, b);
        std::swap(c, d);
        flipped = !flipped;
    }
}

}  // namespace

std::uint32_t otsu_threshold(const DegreeHistogram& hist) {
    const auto nonempty = std::count_if(hist.counts.begin(), hist.counts.end(), [](auto c) { return c > 0; });
    if (nonempty < 2) throw PartitionError("degenerate degree distribution");

    std::uint64_t total_count = 0;
    u128 total_sum = 0;
    for (std::size_t d = 0; d < hist.counts.size(); ++d) {
        total_count += hist.counts[d];
        total_sum += static_cast<u128>(d) * hist.counts[d];
    }
    // w0*w1*(mu0-mu1)^2 = (n1*s0 - n0*s1)^2 / (n^2 * n0 * n1); n^2 is common to every cut,
    // so cuts are ranked by diff^2 / (n0*n1).
    bool have_best = false;
    u128 best_num = 0, best_den = 1;
    std::uint32_t best_t = 0;
    std::uint64_t n0 = 0;
    u128 s0 = 0;
    for (std::size_t t = 0; t + 1 < hist.counts.size(); ++t) {
        n0 += hist.counts[t];
        s0 += static_cast<u128>(t) * hist.counts[t];
        const std::uint64_t n1 = total_count - n0;
        if (n0 == 0 || n1 == 0) continue;
        const u128 s1 = total_sum - s0;
        const u128 lhs = static_cast<u128>(n1) * s0;
        const u128 rhs = static_cast<u128>(n0) * s1;
        const u128 diff = lhs > rhs ? lhs - rhs : rhs - lhs;
        const u128 num = diff * diff;
        const u128 den = static_cast<u128>(n0) * n1;
        if (!have_best || compare_fractions(num, den, best_num, best_den) > 0) {
            have_best = true;
            best_num = num;
            best_den = den;
            best_t = static_cast<std::uint32_t>(t);
        }
    }
    return best_t;
}

std::vector<NodeId> DegreePartition::low_nodes() const {
    std::vector<NodeId> out;
    for (std::size_t v = 0; v < low_mask.size(); ++v)
        if (low_mask[v]) out.push_back(static_cast<NodeId>(v));
    return out;
}

std::vector<NodeId> DegreePartition::high_nodes() const {
    std::vector<NodeId> out;
    for (std::size_t v = 0; v < high_mask.size(); ++v)
        if (high_mask[v]) out.push_back(static_cast<NodeId>(v));
    return out;
}

DegreePartition partition_by_degree(std::span<const std::uint32_t> degrees, std::uint32_t theta) {
    DegreePartition p;
    p.theta = theta;
    p.low_mask.resize(degrees.size());
    p.high_mask.resize(degrees.size());
    for (std::size_t v = 0; v < degrees.size(); ++v) {
        const bool low = degrees[v] <= theta;
        p.low_mask[v] = low;
        p.high_mask[v] = !low;
        (low ? p.low_count : p.high_count) += 1;
    }
    if (p.low_count == 0 || p.high_count == 0) {
        throw PartitionError("partition has empty group (theta=" + std::to_string(theta) + ", low=" +
                             std::to_string(p.low_count) + ", high=" + std::to_string(p.high_count) + ")");
    }
    return p;
}

DegreePartition random_partition(std::size_t n, std::size_t low_count, std::uint64_t seed) {
    if (low_count == 0 || low_count >= n) {
        throw PartitionError("random partition needs 0 < low_count < n (low_count=" + std::to_string(low_count) +
                             ", n=" + std::to_string(n) + ")");
    }
    std::vector<NodeId> order(n);
    std::iota(order.begin(), order.end(), NodeId{0});
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates: the first low_count slots become a uniform random subset.
    for (std::size_t i = 0; i < low_count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(order[i], order[pick(rng)]);
    }
    DegreePartition p;
    p.low_mask.assign(n, false);
    for (std::size_t i = 0; i < low_count; ++i) p.low_mask[order[i]] = true;
    p.high_mask.resize(n);
    for (std::size_t v = 0; v < n; ++v) p.high_mask[v] = !p.low_mask[v];
    p.low_count = low_count;
    p.high_count = n - low_count;
    return p;
}

}  // namespace gnnstrat
