#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>

#include "popforge/audio.hpp"
#include "popforge/corpus.hpp"
#include "popforge/errors.hpp"
#include "test_support.hpp"

using namespace popforge;

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

} // namespace

TEST_CASE("protocol parsing follows the LA column layout") {
    const auto dir = testsup::temp_dir("protocol");
    write_text(dir / "p.txt",
               "LA_0069 LA_D_1047731 - - bonafide\n"
               "LA_0070 LA_D_1105538 - A01 spoof\n"
               "\n"
               "LA_0071 LA_D_1125976 - A03 spoof\n");
    const auto entries = parse_protocol(dir / "p.txt");
    REQUIRE(entries.size() == 3);
    CHECK(entries[0].source_id == "LA_D_1047731");
    CHECK(entries[0].label == Label::REAL);
    CHECK(entries[1].source_id == "LA_D_1105538");
    CHECK(entries[1].label == Label::SPOOF);
    CHECK(entries[2].label == Label::SPOOF);
}

TEST_CASE("protocol parsing: empty file, malformed line, unknown token") {
    const auto dir = testsup::temp_dir("protocol_err");
    write_text(dir / "empty.txt", "");
    CHECK(parse_protocol(dir / "empty.txt").empty());

    write_text(dir / "short.txt", "LA_0069 LA_D_1\n");
    CHECK_THROWS_AS(parse_protocol(dir / "short.txt"), MalformedLine);

    write_text(dir / "badtok.txt", "LA_0069 LA_D_1 - - genuine\n");
    CHECK_THROWS_AS(parse_protocol(dir / "badtok.txt"), UnknownLabelToken);

    CHECK_THROWS_AS(parse_protocol(dir / "missing.txt"), FileNotFound);
}

TEST_CASE("asvspoof 2019 train protocol has the published class counts") {
    const char* root = std::getenv("POPFORGE_DATA_ROOT");
    if (root == nullptr) {
        MESSAGE("POPFORGE_DATA_ROOT not set; skipping dataset check");
        return;
    }
    const auto path = std::filesystem::path(root) / "ASVspoof2019_LA_cm_protocols" /
                      "ASVspoof2019.LA.cm.train.trn.txt";
    if (!std::filesystem::exists(path)) {
        MESSAGE("train protocol not found; skipping dataset check");
        return;
    }
    const auto entries = parse_protocol(path);
    long real = 0, spoof = 0;
    for (const auto& e : entries) (e.label == Label::REAL ? real : spoof) += 1;
    CHECK(real == 2580);
    CHECK(spoof == 22800);
}

TEST_CASE("build_split: EVEN sampling and determinism") {
    std::vector<Entry> entries;
    for (int i = 0; i < 10; ++i) entries.push_back({"R" + std::to_string(i), Label::REAL});
    for (int i = 0; i < 40; ++i) entries.push_back({"S" + std::to_string(i), Label::SPOOF});

    SplitSpec spec;
    spec.mode = SplitSpec::Mode::EVEN;
    spec.per_class = 6;
    spec.seed = 42;
    const auto split = build_split(entries, spec);
    REQUIRE(split.size() == 12);
    long real = 0;
    for (const auto& e : split) real += e.label == Label::REAL ? 1 : 0;
    CHECK(real == 6);

    const auto again = build_split(entries, spec);
    for (std::size_t i = 0; i < split.size(); ++i) {
        CHECK(split[i].source_id == again[i].source_id);
        CHECK(split[i].label == again[i].label);
    }

    // sampling everything is just a shuffle of the full set
    SplitSpec all;
    all.mode = SplitSpec::Mode::EVEN;
    all.per_class = 10;
    all.seed = 1;
    std::vector<Entry> small(entries.begin(), entries.begin() + 10);
    for (int i = 0; i < 10; ++i) small.push_back({"S" + std::to_string(i), Label::SPOOF});
    const auto full = build_split(small, all);
    CHECK(full.size() == 20);
    std::set<std::string> ids;
    for (const auto& e : full) ids.insert(e.source_id);
    CHECK(ids.size() == 20);

    SplitSpec too_many;
    too_many.mode = SplitSpec::Mode::EVEN;
    too_many.per_class = 11;
    CHECK_THROWS_AS(build_split(small, too_many), InsufficientClassCount);
}

TEST_CASE("EVEN selection is invariant to input entry order") {
    std::vector<Entry> entries;
    for (int i = 0; i < 15; ++i) entries.push_back({"R" + std::to_string(i), Label::REAL});
    for (int i = 0; i < 25; ++i) entries.push_back({"S" + std::to_string(i), Label::SPOOF});

    SplitSpec spec;
    spec.mode = SplitSpec::Mode::EVEN;
    spec.per_class = 7;
    spec.seed = 9;
    const auto a = build_split(entries, spec);

    std::vector<Entry> shuffled = entries;
    std::reverse(shuffled.begin(), shuffled.end());
    std::swap(shuffled[3], shuffled[30]);
    const auto b = build_split(shuffled, spec);

    auto ids = [](const std::vector<Entry>& v) {
        std::multiset<std::string> s;
        for (const auto& e : v) s.insert(e.source_id);
        return s;
    };
    CHECK(ids(a) == ids(b)); // same multiset, regardless of enumeration order
}

TEST_CASE("FULL split is a seeded shuffle of everything") {
    std::vector<Entry> entries;
    for (int i = 0; i < 20; ++i)
        entries.push_back({"X" + std::to_string(i), i % 3 ? Label::SPOOF : Label::REAL});
    SplitSpec spec;
    spec.mode = SplitSpec::Mode::FULL;
    spec.seed = 5;
    const auto split = build_split(entries, spec);
    CHECK(split.size() == entries.size());
    std::set<std::string> ids;
    for (const auto& e : split) ids.insert(e.source_id);
    CHECK(ids.size() == entries.size());
}

TEST_CASE("synthetic corpus: counts, protocol, pops in every real clip") {
    const auto dir = testsup::temp_dir("synth_corpus");
    SynthSpec spec;
    spec.n_real = 10;
    spec.n_spoof = 40;
    spec.seed = 2024;
    const auto entries = generate_synthetic_corpus(dir, spec);
    REQUIRE(entries.size() == 50);

    long wavs = 0;
    for (const auto& f : std::filesystem::directory_iterator(dir))
        if (f.path().extension() == ".wav") ++wavs;
    CHECK(wavs == 50);

    const auto parsed = parse_protocol(dir / "protocol.txt");
    REQUIRE(parsed.size() == 50);
    long real = 0;
    for (const auto& e : parsed) real += e.label == Label::REAL ? 1 : 0;
    CHECK(real == 10);

    // oracle: every real clip must trip the default pop detector
    const PopDetectParams pop;
    double real_peak_mean = 0.0, spoof_peak_mean = 0.0;
    for (const auto& e : parsed) {
        const AudioClip clip = load_audio(dir / (e.source_id + ".wav"));
        const auto energies = lowband_energy(clip, pop);
        const double peak = *std::max_element(energies.begin(), energies.end());
        if (e.label == Label::REAL) {
            CHECK(!detect_pops(energies, pop, clip.sample_rate).empty());
            real_peak_mean += peak / 10.0;
        } else {
            spoof_peak_mean += peak / 40.0;
        }
    }
    // replay-style processing mutes the low band
    CHECK(spoof_peak_mean < real_peak_mean);
}

TEST_CASE("extraction skips missing files and keeps split order") {
    const auto dir = testsup::temp_dir("extract_missing");
    SynthSpec spec;
    spec.n_real = 3;
    spec.n_spoof = 3;
    spec.seed = 7;
    generate_synthetic_corpus(dir, spec);

    std::vector<Entry> split = {{"SYN_R_0001", Label::REAL},
                                {"SYN_GONE_01", Label::SPOOF},
                                {"SYN_R_0002", Label::REAL},
                                {"SYN_S_0001", Label::SPOOF}};
    ExtractParams params;
    const CorpusFeatures fx = extract_corpus_features(dir, split, params);
    REQUIRE(fx.skipped_missing.size() == 1);
    CHECK(fx.skipped_missing[0] == "SYN_GONE_01");
    // remaining rows keep split order
    REQUIRE(fx.ids.size() + fx.skipped_absent.size() == 3);
    std::vector<std::string> expect_order;
    for (const auto& e : split) {
        if (e.source_id == "SYN_GONE_01") continue;
        bool absent = std::find(fx.skipped_absent.begin(), fx.skipped_absent.end(),
                                e.source_id) != fx.skipped_absent.end();
        if (!absent) expect_order.push_back(e.source_id);
    }
    CHECK(fx.ids == expect_order);

    CHECK_THROWS_AS(
        extract_corpus_features(dir / "no_such_root", split, params), FileNotFound);
}

TEST_CASE("all-silent corpus yields zero rows") {
    const auto dir = testsup::temp_dir("extract_silent");
    AudioClip silent;
    silent.sample_rate = 16000;
    silent.samples.assign(16000, 0.0);
    save_wav(dir / "A.wav", silent);
    save_wav(dir / "B.wav", silent);

    const std::vector<Entry> split = {{"A", Label::REAL}, {"B", Label::SPOOF}};
    const CorpusFeatures fx = extract_corpus_features(dir, split, ExtractParams{});
    CHECK(fx.features.empty());
    CHECK(fx.skipped_absent.size() == 2);
}

TEST_CASE("row count equals clips with pops, by independent per-clip oracle") {
    const auto dir = testsup::temp_dir("extract_oracle");
    SynthSpec spec;
    spec.n_real = 8;
    spec.n_spoof = 12;
    spec.seed = 99;
    const auto entries = generate_synthetic_corpus(dir, spec);

    ExtractParams params;
    const CorpusFeatures fx = extract_corpus_features(dir, entries, params);

    long clips_with_pops = 0;
    for (const auto& e : entries) {
        const AudioClip clip = load_audio(dir / (e.source_id + ".wav"));
        if (!detect_pops(clip, params.pop).empty()) ++clips_with_pops;
    }
    CHECK(static_cast<long>(fx.features.size()) == clips_with_pops);
}

TEST_CASE("parallel extraction equals serial extraction") {
    const auto dir = testsup::temp_dir("extract_jobs");
    SynthSpec spec;
    spec.n_real = 4;
    spec.n_spoof = 8;
    spec.seed = 5;
    const auto entries = generate_synthetic_corpus(dir, spec);

    ExtractParams serial;
    serial.jobs = 1;
    ExtractParams parallel;
    parallel.jobs = 3;
    const CorpusFeatures a = extract_corpus_features(dir, entries, serial);
    const CorpusFeatures b = extract_corpus_features(dir, entries, parallel);
    CHECK(a.features == b.features);
    CHECK(a.ids == b.ids);
    CHECK(a.skipped_absent == b.skipped_absent);
}

TEST_CASE("overlay audio wins over the base corpus") {
    const auto dir = testsup::temp_dir("extract_overlay");
    const auto overlay = dir / "overlay";
    std::filesystem::create_directories(overlay);

    AudioClip quiet;
    quiet.sample_rate = 16000;
    quiet.samples = testsup::sine(500.0, 0.01, 16000, 16000);
    save_wav(dir / "CLIP.wav", quiet);

    AudioClip loud;
    loud.sample_rate = 16000;
    loud.samples = testsup::sine(80.0, 0.9, 16000, 16000); // low-band heavy
    save_wav(overlay / "CLIP.wav", loud);

    const std::vector<Entry> split = {{"CLIP", Label::SPOOF}};
    ExtractParams params;
    const std::filesystem::path overlay_path = overlay;

    const CorpusFeatures base = extract_corpus_features(dir, split, params);
    const CorpusFeatures with_overlay =
        extract_corpus_features(dir, split, params, &overlay_path);

    // the two reads must differ if the overlay was honored; the loud clip is
    // a pure tone so neither may produce a detection, but energies differ
    const AudioClip a = load_audio(dir / "CLIP.wav");
    const AudioClip b = load_audio(overlay / "CLIP.wav");
    CHECK(lowband_energy(a, params.pop) != lowband_energy(b, params.pop));
    CHECK(base.features.size() + base.skipped_absent.size() == 1);
    CHECK(with_overlay.features.size() + with_overlay.skipped_absent.size() == 1);
}

TEST_CASE("feature csv round trip") {
    const auto dir = testsup::temp_dir("feature_csv");
    CorpusFeatures fx;
    fx.ids = {"A", "B"};
    fx.labels = {Label::REAL, Label::SPOOF};
    fx.features = {{-1.25, 0.5, 0.125}, {3.0, -0.75, 2e-3}};
    fx.skipped_absent = {"C"};
    write_feature_csv(dir / "f.csv", fx);

    const CorpusFeatures back = read_feature_csv(dir / "f.csv");
    CHECK(back.ids == fx.ids);
    CHECK(back.labels == fx.labels);
    CHECK(back.features == fx.features);

    std::ifstream head(dir / "f.csv");
    std::string first;
    std::getline(head, first);
    CHECK(first == "source_id,label,gfcc_mean,delta1,delta2");
    CHECK(std::filesystem::exists(dir / "f_skipped.txt"));
}
