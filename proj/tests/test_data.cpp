#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "grn/data.hpp"
#include "grn/dataset_io.hpp"

using namespace grn;

namespace {

SynthConfig small_config(uint64_t seed = 1, double depth = 0.8) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.classes = representative_classes();
    for (auto& c : cfg.classes) c.depth = depth;
    cfg.trials_per_class = 2;
    return cfg;
}

// band power via the magnitude spectrum
double band_power(const std::vector<double>& x, double fs, double lo, double hi) {
    const auto mag = magnitude_spectrum(x);
    const int nfft = 2 * (int(mag.size()) - 1);
    double p = 0;
    for (size_t i = 1; i < mag.size(); ++i) {
        const double f = double(i) * fs / nfft;
        if (f >= lo && f <= hi) p += mag[i] * mag[i];
    }
    return p;
}

std::vector<double> channel_of(const RawTrial& t, int ch) {
    const int T = t.samples.dim(1);
    return std::vector<double>(t.samples.data.begin() + int64_t(ch) * T,
                               t.samples.data.begin() + int64_t(ch + 1) * T);
}

}  // namespace

TEST_CASE("generation is deterministic in the seed") {
    const auto a = generate_session(small_config(5));
    const auto b = generate_session(small_config(5));
    const auto c = generate_session(small_config(6));
    REQUIRE(a.trials.size() == b.trials.size());
    for (size_t i = 0; i < a.trials.size(); ++i)
        CHECK(a.trials[i].samples.data == b.trials[i].samples.data);
    CHECK(a.trials[0].samples.data != c.trials[0].samples.data);
}

TEST_CASE("class signal suppresses its band at the focal channel") {
    auto cfg = small_config(3);
    cfg.trials_per_class = 6;
    const auto ds = generate_session(cfg);
    const auto& cls = cfg.classes[0];  // mu-band focus at grid (1, 2): FCz

    // focal channel index
    const auto idx = select_and_grid(ds.channel_names);
    const int focal = idx[static_cast<size_t>(5 * int(cls.focus_row) + int(cls.focus_col))];
    const int far = idx[24];  // P4 corner, far from the focus

    double focal_own = 0, focal_other = 0;
    int n_own = 0, n_other = 0;
    for (const auto& t : ds.trials) {
        const double p = band_power(channel_of(t, focal), cfg.fs, cls.band_lo, cls.band_hi);
        if (t.label == 0) {
            focal_own += p;
            ++n_own;
        } else {
            focal_other += p;
            ++n_other;
        }
    }
    // the class's own trials show attenuated band power at its focus
    CHECK(focal_own / n_own < 0.6 * focal_other / n_other);

    // far from the focus the attenuation is negligible
    double far_own = 0, far_other = 0;
    for (const auto& t : ds.trials) {
        const double p = band_power(channel_of(t, far), cfg.fs, cls.band_lo, cls.band_hi);
        (t.label == 0 ? far_own : far_other) += p;
    }
    CHECK(far_own / n_own > 0.7 * far_other / n_other);
}

TEST_CASE("zero modulation depth removes all class structure") {
    auto cfg = small_config(9, 0.0);
    const auto ds = generate_session(cfg);
    // with depth 0 the per-trial stream is identical regardless of class spec
    // geometry: regenerate with permuted focus locations and compare
    auto cfg2 = cfg;
    std::swap(cfg2.classes[0].focus_row, cfg2.classes[0].focus_col);
    cfg2.classes[1].focus_row = 0.0;
    const auto ds2 = generate_session(cfg2);
    for (size_t i = 0; i < ds.trials.size(); ++i)
        CHECK(ds.trials[i].samples.data == ds2.trials[i].samples.data);
}

TEST_CASE("raw dataset round-trips bit-exactly") {
    const auto ds = generate_session(small_config(11));
    const std::string path = "raw_roundtrip.tmp";
    save_raw_dataset(ds, path);
    const auto ds2 = load_raw_dataset(path);
    CHECK(ds2.fs == ds.fs);
    CHECK(ds2.channel_names == ds.channel_names);
    CHECK(ds2.class_names == ds.class_names);
    REQUIRE(ds2.trials.size() == ds.trials.size());
    for (size_t i = 0; i < ds.trials.size(); ++i) {
        CHECK(ds2.trials[i].label == ds.trials[i].label);
        // payload is f32; saving the loaded copy must reproduce the bytes
    }
    const std::string path2 = "raw_roundtrip2.tmp";
    save_raw_dataset(ds2, path2);
    CHECK(detail::read_all(path) == detail::read_all(path2));
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("grid dataset round-trips bit-exactly") {
    auto cfg = small_config(13);
    const auto ds = preprocess_dataset(generate_session(cfg));
    CHECK(ds.fs == doctest::Approx(250.0));
    for (const auto& t : ds.trials) CHECK(t.grid.shape == std::vector<int>{5, 5, 750});

    const std::string path = "grid_roundtrip.tmp";
    save_grid_dataset(ds, path);
    const auto ds2 = load_grid_dataset(path);
    REQUIRE(ds2.trials.size() == ds.trials.size());
    const std::string path2 = "grid_roundtrip2.tmp";
    save_grid_dataset(ds2, path2);
    CHECK(detail::read_all(path) == detail::read_all(path2));
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("corrupt and truncated files are rejected with distinct errors") {
    const auto ds = generate_session(small_config(17));
    const std::string path = "corrupt.tmp";
    save_raw_dataset(ds, path);
    const std::string good = detail::read_all(path);

    SUBCASE("flipped payload byte -> checksum error") {
        std::string bad = good;
        bad[bad.size() / 2] = char(bad[bad.size() / 2] ^ 0x40);
        std::ofstream(path, std::ios::binary | std::ios::trunc) << bad;
        try {
            (void)load_raw_dataset(path);
            FAIL("expected checksum error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Checksum);
        }
    }

    SUBCASE("truncated payload -> truncation error") {
        std::ofstream(path, std::ios::binary | std::ios::trunc)
            << good.substr(0, good.size() - 2000);
        try {
            (void)load_raw_dataset(path);
            FAIL("expected truncation error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Truncated);
        }
    }

    SUBCASE("wrong version -> version error") {
        std::string bad = good;
        bad[8] = '9';  // "GRNDATA 9"
        std::ofstream(path, std::ios::binary | std::ios::trunc) << bad;
        try {
            (void)load_raw_dataset(path);
            FAIL("expected version error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Version);
        }
    }

    SUBCASE("not a dataset at all -> io error") {
        std::ofstream(path, std::ios::binary | std::ios::trunc) << "hello world\n{}\n";
        try {
            (void)load_raw_dataset(path);
            FAIL("expected io error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Io);
        }
    }

    SUBCASE("grid loader refuses a raw file") {
        CHECK_THROWS_AS((void)load_grid_dataset(path), Error);
    }

    std::remove(path.c_str());
}

TEST_CASE("fnv-1a reference values") {
    const uint8_t empty[1] = {0};
    CHECK(detail::fnv1a64(empty, 0) == 0xcbf29ce484222325ULL);
    const char* s = "a";
    CHECK(detail::fnv1a64(reinterpret_cast<const uint8_t*>(s), 1) == 0xaf63dc4c8601ec8cULL);
    const char* t = "foobar";
    CHECK(detail::fnv1a64(reinterpret_cast<const uint8_t*>(t), 6) == 0x85944171f73967e8ULL);
}

TEST_CASE("default config covers eleven classes over three sub-parts") {
    const auto cfg = default_synth_config();
    REQUIRE(cfg.classes.size() == 11);
    int subparts[3] = {0, 0, 0};
    for (const auto& c : cfg.classes) {
        REQUIRE(c.subpart >= 0);
        REQUIRE(c.subpart <= 2);
        ++subparts[c.subpart];
    }
    CHECK(subparts[0] == 6);  // upper-arm: 1 representative + 5 candidates
    CHECK(subparts[1] == 2);  // forearm: 1 + 1
    CHECK(subparts[2] == 3);  // hand: 1 + 2
    // representatives first, in class-id order 0..2
    for (int k = 0; k < 3; ++k) CHECK(cfg.classes[static_cast<size_t>(k)].subpart == k % 3);
}
