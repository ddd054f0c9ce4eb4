/*
 * Copyright 2026 The cachescope Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <random>

#include "cachescope/config.hpp"
#include "cachescope/io.hpp"
#include "cachescope/svg.hpp"

namespace cachescope {
namespace {

TEST(PhasesSidecar, RoundTrip) {
    phase_labeling labeling;
    labeling.labels = {0, 0, 1, 2, 1, 0};
    labeling.num_phases = 3;
    const auto back = parse_phases(serialize_phases(labeling));
    EXPECT_EQ(back, labeling);

    EXPECT_THROW(parse_phases(""), data_error);
    EXPECT_THROW(parse_phases("0\n2\n"), data_error); // id 1 missing
    EXPECT_THROW(parse_phases("0\nx\n"), data_error);
}

TEST(StreamsSidecar, RoundTrip) {
    stream s;
    s.member_indices = {4, 6, 8, 10};
    s.base = 0x1000;
    s.stride = -64;
    const auto parsed = parse_streams(serialize_streams({s}));
    ASSERT_EQ(parsed.size(), 1u);
    EXPECT_EQ(parsed[0].start_index, 4u);
    EXPECT_EQ(parsed[0].end_index, 10u);
    EXPECT_EQ(parsed[0].base, 0x1000u);
    EXPECT_EQ(parsed[0].stride, -64);

    EXPECT_THROW(parse_streams("1,2,3\n"), data_error);
}

TEST(SimCsv, RoundTrip) {
    trace t;
    t.line_size = 64;
    t.accesses = {{0x10, 0x1000}, {0x14, 0x1040}, {0x10, 0x1000}};
    sim_result sim;
    sim.hits = {0, 0, 1};
    sim.hit_count = 1;
    sim.hit_rate = 1.0 / 3.0;

    const std::string csv = serialize_sim_csv(t, sim);
    EXPECT_TRUE(csv.starts_with("index,pc,address,hit\n"));
    const auto back = parse_sim_csv(csv);
    ASSERT_EQ(back.pc.size(), 3u);
    EXPECT_EQ(back.pc[1], 0x14u);
    EXPECT_EQ(back.address[1], 0x1040u);
    EXPECT_EQ(back.hit[2], 1);

    EXPECT_THROW(parse_sim_csv("nope\n"), data_error);
    EXPECT_THROW(parse_sim_csv("index,pc,address,hit\n"), data_error);
}

TEST(RecordFile, RoundTrip) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> normal;
    activation_record rec;
    rec.kind = record_kind::hidden_state;
    rec.data = matrix(7, 3);
    for (double& v : rec.data.data) v = normal(rng);

    const auto back = parse_record(serialize_record(rec));
    EXPECT_EQ(back.kind, rec.kind);
    EXPECT_EQ(back.data, rec.data); // bit-exact through shortest round-trip formatting

    EXPECT_THROW(parse_record("kind,hidden-state\nrows,2\n"), data_error);
    EXPECT_THROW(parse_record("kind,nonsense\nrows,0\ncols,0\n"), data_error);
}

TEST(PcaCsv, RoundTrip) {
    pca_result r;
    r.projections = matrix(4, 2);
    for (std::size_t i = 0; i < 4; ++i) {
        r.projections(i, 0) = static_cast<double>(i) * 0.5;
        r.projections(i, 1) = -static_cast<double>(i);
    }
    const std::string csv = serialize_pca_csv(r);
    const matrix back = parse_pca_csv(csv);
    EXPECT_EQ(back, r.projections);
}

TEST(CorrelationCsv, MissingBecomesNA) {
    correlation_report report;
    report.num_components = 1;
    report.num_phases = 2;
    report.r = {0.5, std::nullopt};
    const std::string csv = serialize_correlation_csv(report);
    EXPECT_NE(csv.find("0,0,0.5"), std::string::npos);
    EXPECT_NE(csv.find("0,1,NA"), std::string::npos);
}

TEST(Manifest, DeterministicBytes) {
    run_manifest m;
    m.command = "simulate";
    m.parameters["cache.total_lines"] = "16";
    m.parameters["policy.list"] = "belady,lru";
    m.input_hashes["in.trace"] = "0xabc";
    m.output_hashes["sim.csv"] = "0xdef";
    const std::string a = m.serialize();
    const std::string b = m.serialize();
    EXPECT_EQ(a, b);
    EXPECT_NE(a.find("\"command\""), std::string::npos);
}

TEST(Manifest, SameNamedInputsFromDifferentDirsBothRecorded) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "cachescope_manifest";
    fs::create_directories(dir / "a");
    fs::create_directories(dir / "b");
    write_text_file((dir / "a" / "record.rec").string(), "first");
    write_text_file((dir / "b" / "record.rec").string(), "second");

    run_manifest m;
    m.add_input((dir / "a" / "record.rec").string());
    m.add_input((dir / "b" / "record.rec").string());
    ASSERT_EQ(m.input_hashes.size(), 2u);
    EXPECT_TRUE(m.input_hashes.contains("record.rec"));
    EXPECT_TRUE(m.input_hashes.contains("record.rec#2"));
    EXPECT_NE(m.input_hashes["record.rec"], m.input_hashes["record.rec#2"]);
}

TEST(Config, ParseAndTypes) {
    const auto cfg = experiment_config::parse(
        "# comment\n"
        "line_size = 64\n"
        "cache.total_lines = 0x10\n"
        "model.learning_rate = 0.05\n"
        "flag = true\n"
        "name = two words\n");
    EXPECT_EQ(cfg.get_u64("line_size", 0), 64u);
    EXPECT_EQ(cfg.get_u64("cache.total_lines", 0), 16u);
    EXPECT_DOUBLE_EQ(cfg.get_double("model.learning_rate", 0), 0.05);
    EXPECT_TRUE(cfg.get_bool("flag", false));
    EXPECT_EQ(cfg.get_string("name"), "two words");
    EXPECT_EQ(cfg.get_u64("absent", 7), 7u);
    EXPECT_THROW(cfg.get_string("absent"), data_error);
    EXPECT_THROW(experiment_config::parse("novalue\n"), data_error);
}

TEST(Config, SerializeParseRoundTrip) {
    const auto cfg = experiment_config::parse(
        "b.key = 2\n"
        "a.key = hex 0x10\n"
        "z = trailing words  \n");
    const auto back = experiment_config::parse(cfg.serialize());
    EXPECT_EQ(back.entries(), cfg.entries());
    // Serialization is canonical: sorted keys, single spacing.
    EXPECT_EQ(cfg.serialize(), "a.key = hex 0x10\nb.key = 2\nz = trailing words\n");
}

TEST(Config, SynthSpecRoundTrip) {
    const auto cfg = experiment_config::parse(
        "line_size = 64\n"
        "synth.seed = 5\n"
        "synth.segment.0.duration = 200\n"
        "synth.segment.0.phase = 0\n"
        "synth.segment.0.ws.kind = cyclic\n"
        "synth.segment.0.ws.base = 0x10000\n"
        "synth.segment.0.ws.lines = 8\n"
        "synth.segment.0.stream_every = 2\n"
        "synth.segment.0.stream.0.base = 0x900000\n"
        "synth.segment.0.stream.0.stride = 64\n"
        "synth.segment.0.stream.0.length = 50\n"
        "synth.segment.0.stream.0.pc = 0x77\n"
        "synth.segment.1.duration = 100\n"
        "synth.segment.1.phase = 1\n"
        "synth.segment.1.ws.kind = uniform\n");
    const auto spec = synth_from_config(cfg);
    ASSERT_EQ(spec.segments.size(), 2u);
    EXPECT_EQ(spec.seed, 5u);
    EXPECT_EQ(spec.segments[0].working_set.kind, working_set_kind::cyclic);
    ASSERT_EQ(spec.segments[0].streams.size(), 1u);
    EXPECT_EQ(spec.segments[0].streams[0].length, 50u);
    EXPECT_EQ(spec.segments[1].phase_id, 1u);

    const auto out = generate_synthetic(spec);
    EXPECT_EQ(out.t.size(), 300u);

    // Seed override changes the trace; same override reproduces it.
    const auto a = generate_synthetic(synth_from_config(cfg, 123));
    const auto b = generate_synthetic(synth_from_config(cfg, 123));
    EXPECT_EQ(a.t, b.t);
}

TEST(Svg, ScatterHasOneMarkerPerAccess) {
    sim_csv sim;
    for (int i = 0; i < 37; ++i) {
        sim.pc.push_back(0x100 + i);
        sim.address.push_back(0x1000 + 64 * (i % 5));
        sim.hit.push_back(i % 3 == 0);
    }
    const std::string svg_text = svg::render_scatter(sim, 8);
    std::size_t markers = 0, pos = 0;
    while ((pos = svg_text.find("<circle", pos)) != std::string::npos) {
        ++markers;
        pos += 7;
    }
    EXPECT_EQ(markers, 37u);
    EXPECT_EQ(svg_text, svg::render_scatter(sim, 8)); // identical bytes
}

TEST(Svg, StackHasOnePolylinePerComponentAndPolicy) {
    sim_csv sim;
    for (int i = 0; i < 20; ++i) {
        sim.pc.push_back(0x100 + i);
        sim.address.push_back(0x1000 + 64 * i);
        sim.hit.push_back(i % 2);
    }
    matrix pcs(20, 5);
    for (std::size_t i = 0; i < 20; ++i)
        for (std::size_t c = 0; c < 5; ++c)
            pcs(i, c) = std::sin(static_cast<double>(i + c));

    const std::string svg_text =
        svg::render_stack({{"belady", sim}, {"lru", sim}}, pcs, 4);
    std::size_t polylines = 0, pos = 0;
    while ((pos = svg_text.find("<polyline", pos)) != std::string::npos) {
        ++polylines;
        pos += 9;
    }
    EXPECT_EQ(polylines, 5u + 2u); // 5 PC series + 2 hit-rate curves
}

TEST(Svg, PhaseBandsOneRectPerRun) {
    phase_labeling labeling;
    labeling.labels = {0, 0, 1, 1, 1, 0, 2, 2};
    labeling.num_phases = 3;
    const std::string svg_text = svg::render_phase_bands(labeling);
    std::size_t rects = 0, pos = 0;
    while ((pos = svg_text.find("<rect", pos)) != std::string::npos) {
        ++rects;
        pos += 5;
    }
    EXPECT_EQ(rects, 4u + 1u); // 4 runs + background
}

TEST(Hashing, FnvDistinguishesContent) {
    EXPECT_NE(fnv1a("abc"), fnv1a("abd"));
    EXPECT_EQ(fnv1a("same"), fnv1a("same"));
}

TEST(Formatting, DoubleRoundTrip) {
    for (double v : {0.0, -1.5, 0.1, 3.141592653589793, 1e-12, -7e100}) {
        const std::string s = format_double(v);
        EXPECT_DOUBLE_EQ(detail::parse_double(s, "v"), v);
    }
}

} // namespace
} // namespace cachescope
