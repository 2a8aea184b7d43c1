#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace gsa {

/// Worker-thread cap used by the contraction engine. Defaults to the
/// GSA_THREADS environment variable, or 1 when unset.
void set_num_threads(std::size_t n);
std::size_t num_threads();

/// Splits [0, n) into contiguous chunks and runs `body(begin, end)` on up to
/// num_threads() workers. Chunks never overlap, so any per-element result is
/// independent of the thread count.
void parallel_for(std::size_t n, std::size_t min_chunk,
                  const std::function<void(std::size_t, std::size_t)>& body);

/// Multiplications and additions tallied separately.
struct FlopTally {
    std::uint64_t mults = 0;
    std::uint64_t adds = 0;

    std::uint64_t total() const { return mults + adds; }
    FlopTally& operator+=(const FlopTally& o) {
        mults += o.mults;
        adds += o.adds;
        return *this;
    }
};

/**
 * Scoped, thread-local counter of arithmetic performed by contractions and
 * convolutions. Scopes nest; the innermost active scope receives the counts.
 */
class FlopCounter {
public:
    FlopCounter();
    ~FlopCounter();
    FlopCounter(const FlopCounter&) = delete;
    FlopCounter& operator=(const FlopCounter&) = delete;

    const FlopTally& tally() const { return tally_; }

    /// Adds `macs` multiply-accumulates (one mult and one add each).
    static void record_macs(std::uint64_t macs);

private:
    FlopTally tally_;
    FlopCounter* parent_;
};

/// Suspends counting for its lifetime (used for pure re-indexing work).
class FlopPause {
public:
    FlopPause();
    ~FlopPause();
    FlopPause(const FlopPause&) = delete;
    FlopPause& operator=(const FlopPause&) = delete;

private:
    FlopCounter* saved_;
};

}  // namespace gsa
