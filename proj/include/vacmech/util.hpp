#ifndef VACMECH_UTIL_HPP
#define VACMECH_UTIL_HPP

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace vacmech {

inline const char* version_string() { return "vacmech 1.0.0"; }

// ---------------------------------------------------------------- errors
//
// One root type so callers can catch everything from this library at once;
// the concrete classes carry the failure cause in the name.

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define VACMECH_DEFINE_ERROR(Name)                                     \
    class Name : public Error {                                        \
    public:                                                            \
        explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
    }

VACMECH_DEFINE_ERROR(DimensionOverflow);
VACMECH_DEFINE_ERROR(InvalidCutoff);
VACMECH_DEFINE_ERROR(IndexOutOfRange);
VACMECH_DEFINE_ERROR(SpaceMismatch);
VACMECH_DEFINE_ERROR(InvalidOrder);
VACMECH_DEFINE_ERROR(WrongModel);
VACMECH_DEFINE_ERROR(DegenerateDetuning);
VACMECH_DEFINE_ERROR(NotHermitian);
VACMECH_DEFINE_ERROR(NoConvergence);
VACMECH_DEFINE_ERROR(NoBracketedMinimum);
VACMECH_DEFINE_ERROR(SingularDenominator);
VACMECH_DEFINE_ERROR(UnknownMethod);
VACMECH_DEFINE_ERROR(ToleranceFailure);
VACMECH_DEFINE_ERROR(InvalidInitialState);
VACMECH_DEFINE_ERROR(WindowTooShort);
VACMECH_DEFINE_ERROR(NonuniformGrid);
VACMECH_DEFINE_ERROR(MissingObservable);
VACMECH_DEFINE_ERROR(ConfigParseError);
VACMECH_DEFINE_ERROR(ValidationError);

#undef VACMECH_DEFINE_ERROR

// ---------------------------------------------------------------- threads

namespace detail {
inline std::atomic<int>& thread_count_storage() {
    static std::atomic<int> n{0};  // 0 = not yet resolved
    return n;
}
}  // namespace detail

inline int default_thread_count() {
    if (const char* env = std::getenv("VACMECH_THREADS")) {
        int v = std::atoi(env);
        if (v >= 1) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

inline void set_thread_count(int n) {
    detail::thread_count_storage().store(n >= 1 ? n : 1);
}

inline int thread_count() {
    int n = detail::thread_count_storage().load();
    if (n == 0) {
        n = default_thread_count();
        detail::thread_count_storage().store(n);
    }
    return n;
}

// Runs fn(i) for i in [0, n). Work is split into contiguous index ranges, one
// per worker, so results written to disjoint slots are deterministic.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const int workers = thread_count();
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    std::vector<std::thread> pool;
    pool.reserve(w);
    std::atomic<std::size_t> fail_count{0};
    std::string first_error;
    std::atomic<bool> error_set{false};
    for (std::size_t t = 0; t < w; ++t) {
        const std::size_t lo = n * t / w, hi = n * (t + 1) / w;
        pool.emplace_back([&, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (const std::exception& e) {
                if (!error_set.exchange(true)) first_error = e.what();
                fail_count.fetch_add(1);
            }
        });
    }
    for (auto& th : pool) th.join();
    if (fail_count.load() > 0) throw Error("parallel_for worker failed: " + first_error);
}

// ---------------------------------------------------------------- misc

// FNV-1a, used for config digests and trajectory checksums.
inline std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h = 1469598103934665603ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Shortest decimal form that round-trips a double (17 significant digits).
inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace vacmech

#endif
