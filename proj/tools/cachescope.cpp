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

// cachescope: trace-driven cache policy simulation, phase and stream
// analysis, imitation-trained eviction models, and probes of their internals.
//
// Every command reads a flat key-value config (--config), writes its
// artifacts plus a run manifest into --out, and is byte-reproducible from
// config + inputs + --seed. Exit codes: 0 ok, 1 usage, 2 bad data,
// 3 broken internal contract.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cachescope/cachesim.hpp"
#include "cachescope/config.hpp"
#include "cachescope/io.hpp"
#include "cachescope/model.hpp"
#include "cachescope/phases.hpp"
#include "cachescope/probe.hpp"
#include "cachescope/streams.hpp"
#include "cachescope/svg.hpp"
#include "cachescope/synth.hpp"
#include "cachescope/trace.hpp"

namespace fs = std::filesystem;
using namespace cachescope;

namespace {

struct common_opts {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::string trace_override; // --trace beats the config's trace source
};

void add_common(CLI::App* cmd, common_opts& opts, bool config_required = true) {
    auto* c = cmd->add_option("--config", opts.config_path, "experiment config file");
    if (config_required) c->required();
    cmd->add_option("--out", opts.out_dir, "output directory")->required();
    cmd->add_option("--seed", opts.seed, "seed override (synthetic trace and model)");
    cmd->add_option("--trace", opts.trace_override, "trace file, overriding the config's source");
}

experiment_config load_config(const common_opts& opts) {
    experiment_config cfg = opts.config_path.empty() ? experiment_config{}
                                                     : experiment_config::load(opts.config_path);
    if (!opts.trace_override.empty()) cfg.set("trace.file", opts.trace_override);
    return cfg;
}

std::string out_path(const common_opts& opts, const std::string& name) {
    fs::create_directories(opts.out_dir);
    return (fs::path(opts.out_dir) / name).string();
}

run_manifest start_manifest(const std::string& command, const common_opts& opts,
                            const experiment_config& cfg) {
    run_manifest m;
    m.command = command;
    for (const auto& [k, v] : cfg.entries()) m.parameters[k] = v;
    if (opts.seed) m.parameters["seed.override"] = std::to_string(*opts.seed);
    if (!opts.config_path.empty()) m.add_input(opts.config_path);
    if (cfg.has("trace.file")) m.add_input(cfg.get_string("trace.file"));
    return m;
}

void finish_manifest(run_manifest& m, const common_opts& opts,
                     const std::vector<std::string>& outputs) {
    for (const auto& path : outputs) m.add_output(path);
    write_manifest(out_path(opts, "manifest_" + m.command + ".json"), m);
}

// --- synth -------------------------------------------------------------------

int cmd_synth(const common_opts& opts) {
    const auto cfg = load_config(opts);
    auto manifest = start_manifest("synth", opts, cfg);
    const auto out = generate_synthetic(synth_from_config(cfg, opts.seed));

    const std::string trace_path = out_path(opts, "trace.trace");
    const std::string phases_path = out_path(opts, "trace.phases");
    const std::string streams_path = out_path(opts, "trace.streams");
    write_trace_file(trace_path, out.t);
    write_phases_file(phases_path, out.phases);
    write_streams_file(streams_path, out.streams);
    finish_manifest(manifest, opts, {trace_path, phases_path, streams_path});

    std::cout << "synthetic trace: " << out.t.size() << " accesses, "
              << out.phases.num_phases << " planted phases, " << out.streams.size()
              << " planted streams -> " << trace_path << "\n";
    return 0;
}

// --- simulate ----------------------------------------------------------------

caching_model load_checkpoint(const experiment_config& cfg, const std::string& flag_path,
                              const std::string& needed_by, run_manifest& manifest) {
    std::string path = flag_path;
    if (path.empty()) path = cfg.get_string("model.checkpoint", "");
    if (path.empty())
        throw data_error(needed_by + " needs a model checkpoint; run `cachescope train` first "
                                     "and pass --checkpoint (or set model.checkpoint)");
    manifest.add_input(path);
    return load_model(path);
}

int cmd_simulate(common_opts opts, const std::string& checkpoint_flag,
                 const std::string& policies_flag) {
    auto cfg = load_config(opts);
    if (!policies_flag.empty()) cfg.set("policy.list", policies_flag);
    auto manifest = start_manifest("simulate", opts, cfg);
    const trace t = resolve_trace(cfg, opts.seed);
    const cache_config cache = cache_from_config(cfg);

    const auto policy_names = split_list(cfg.get_string("policy.list", "belady,lru,phase-freq"));
    std::vector<std::string> outputs;
    std::vector<std::pair<std::string, double>> table;

    for (const auto& name : policy_names) {
        std::unique_ptr<eviction_policy> policy;
        if (name == "belady") {
            policy = policy_belady(t);
        } else if (name == "lru") {
            policy = policy_lru();
        } else if (name == "phase-freq") {
            const auto labeling = find_phases(t, phases_from_config(cfg));
            auto table_counts = build_phase_frequency_table(t, labeling);
            policy = policy_phase_freq(labeling, std::move(table_counts));
        } else if (name == "model") {
            auto m = load_checkpoint(cfg, checkpoint_flag, "policy \"model\"", manifest);
            policy = model_policy(std::move(m));
        } else {
            throw usage_error("unknown policy: " + name +
                              " (expected belady, lru, phase-freq, or model)");
        }

        const sim_result result = simulate(t, cache, *policy);
        const std::string csv_path = out_path(opts, "sim_" + name + ".csv");
        write_text_file(csv_path, serialize_sim_csv(t, result));
        nlohmann::json summary;
        summary["policy"] = name;
        summary["cache"] = {{"total_lines", cache.total_lines},
                            {"associativity", cache.associativity},
                            {"line_size", cache.line_size}};
        summary["hit_rate"] = result.hit_rate;
        summary["hits"] = result.hit_count;
        summary["accesses"] = t.size();
        summary["evictions"] = result.evictions.size();
        const std::string summary_path = out_path(opts, "sim_" + name + ".summary.json");
        write_text_file(summary_path, summary.dump(2) + "\n");
        outputs.push_back(csv_path);
        outputs.push_back(summary_path);
        table.emplace_back(name, result.hit_rate);
    }

    // Comparison table, optimal policy first when present.
    std::stable_sort(table.begin(), table.end(), [](const auto& a, const auto& b) {
        return (a.first == "belady") > (b.first == "belady");
    });
    std::string table_csv = "policy,hit_rate\n";
    std::cout << "policy       hit_rate\n";
    for (const auto& [name, rate] : table) {
        table_csv += name + "," + format_double(rate) + "\n";
        std::cout << name << std::string(name.size() < 13 ? 13 - name.size() : 1, ' ')
                  << format_double(rate) << "\n";
    }
    const std::string table_path = out_path(opts, "policy_table.csv");
    write_text_file(table_path, table_csv);
    outputs.push_back(table_path);

    finish_manifest(manifest, opts, outputs);
    return 0;
}

// --- phases ------------------------------------------------------------------

int cmd_phases(const common_opts& opts) {
    const auto cfg = load_config(opts);
    auto manifest = start_manifest("phases", opts, cfg);
    const trace t = resolve_trace(cfg, opts.seed);
    const phase_params params = phases_from_config(cfg);

    const reuse_profile profile = compute_reuse_profile(t);
    const auto slices = slice_features(t, profile, params.slice_len, params.bins);
    const auto segments = merge_neighbors(slices, params.merge_threshold, params.dpc_weight);
    const auto labeling = global_cluster(segments, params.cluster_threshold, params.dpc_weight);

    const std::string phases_path = out_path(opts, "trace.phases");
    write_phases_file(phases_path, labeling);

    std::string features_csv = "slice,begin,end,kind,bin,value\n";
    for (std::size_t s = 0; s < slices.size(); ++s) {
        for (std::size_t b = 0; b < slices[s].reuse_hist.size(); ++b)
            features_csv += std::to_string(s) + "," + std::to_string(slices[s].begin) + "," +
                            std::to_string(slices[s].end) + ",reuse," + std::to_string(b) + "," +
                            format_double(slices[s].reuse_hist[b]) + "\n";
        for (std::size_t b = 0; b < slices[s].dpc_hist.size(); ++b)
            features_csv += std::to_string(s) + "," + std::to_string(slices[s].begin) + "," +
                            std::to_string(slices[s].end) + ",dpc," + std::to_string(b) + "," +
                            format_double(slices[s].dpc_hist[b]) + "\n";
    }
    const std::string features_path = out_path(opts, "features.csv");
    write_text_file(features_path, features_csv);

    finish_manifest(manifest, opts, {phases_path, features_path});
    std::cout << "phases: " << labeling.num_phases << " over " << t.size() << " accesses ("
              << segments.size() << " segments) -> " << phases_path << "\n";
    return 0;
}

// --- streams -----------------------------------------------------------------

stream select_stream(const std::vector<stream>& streams, std::optional<std::size_t> id,
                     std::optional<std::uint64_t> base, std::optional<std::int64_t> stride) {
    if (id) {
        if (*id >= streams.size())
            throw data_error("stream id " + std::to_string(*id) + " out of range (found " +
                             std::to_string(streams.size()) + ")");
        return streams[*id];
    }
    if (base && stride) {
        for (const auto& s : streams)
            if (s.base == *base && s.stride == *stride) return s;
        throw data_error("no detected stream matches base/stride");
    }
    throw usage_error("select a stream with --id or with --base and --stride");
}

int cmd_streams_detect(const common_opts& opts) {
    const auto cfg = load_config(opts);
    auto manifest = start_manifest("streams-detect", opts, cfg);
    const trace t = resolve_trace(cfg, opts.seed);
    const auto streams = detect_streams(t, streams_from_config(cfg));

    const std::string sidecar_path = out_path(opts, "detected.streams");
    write_streams_file(sidecar_path, streams);

    // Report: span, geometry, and the PCs the members came from.
    std::string report = "id,start,end,base,stride,length,pcs\n";
    for (std::size_t i = 0; i < streams.size(); ++i) {
        const auto& s = streams[i];
        std::vector<std::uint64_t> pcs;
        for (std::size_t idx : s.member_indices) pcs.push_back(t.accesses[idx].pc);
        std::sort(pcs.begin(), pcs.end());
        pcs.erase(std::unique(pcs.begin(), pcs.end()), pcs.end());
        std::string pc_list;
        for (std::uint64_t pc : pcs) {
            if (!pc_list.empty()) pc_list += ';';
            pc_list += to_hex(pc);
        }
        report += std::to_string(i) + "," + std::to_string(s.span_begin()) + "," +
                  std::to_string(s.span_end()) + "," + to_hex(s.base) + "," +
                  std::to_string(s.stride) + "," + std::to_string(s.length()) + "," + pc_list +
                  "\n";
    }
    const std::string report_path = out_path(opts, "streams_report.csv");
    write_text_file(report_path, report);

    finish_manifest(manifest, opts, {sidecar_path, report_path});
    std::cout << "streams: " << streams.size() << " detected -> " << sidecar_path << "\n";
    return 0;
}

int cmd_streams_edit(const common_opts& opts, bool keep_suffix, double fraction,
                     std::optional<std::size_t> id, std::optional<std::uint64_t> base,
                     std::optional<std::int64_t> stride) {
    const auto cfg = load_config(opts);
    auto manifest = start_manifest(keep_suffix ? "streams-keep-suffix" : "streams-remove", opts, cfg);
    const trace t = resolve_trace(cfg, opts.seed);
    const auto streams = detect_streams(t, streams_from_config(cfg));
    const stream target = select_stream(streams, id, base, stride);

    const trace_edit edit =
        keep_suffix ? keep_stream_suffix(t, target, fraction) : remove_stream(t, target);

    const std::string trace_path = out_path(opts, "edited.trace");
    const std::string map_path = out_path(opts, "index.map");
    write_trace_file(trace_path, edit.edited);
    write_index_map_file(map_path, edit.index_map);
    manifest.parameters["stream.base"] = to_hex(target.base);
    manifest.parameters["stream.stride"] = std::to_string(target.stride);
    manifest.parameters["stream.length"] = std::to_string(target.length());
    if (keep_suffix) manifest.parameters["fraction"] = format_double(fraction);
    finish_manifest(manifest, opts, {trace_path, map_path});

    std::cout << (keep_suffix ? "kept suffix of" : "removed") << " stream base "
              << to_hex(target.base) << " stride " << target.stride << ": " << t.size() << " -> "
              << edit.edited.size() << " accesses -> " << trace_path << "\n";
    return 0;
}

// --- train -------------------------------------------------------------------

int cmd_train(const common_opts& opts) {
    const auto cfg = load_config(opts);
    auto manifest = start_manifest("train", opts, cfg);
    const trace t = resolve_trace(cfg, opts.seed);
    const cache_config cache = cache_from_config(cfg);
    model_config mc = model_from_config(cfg, opts.seed);
    if (cfg.get_string("model.optimizer", "adam") == "sgd")
        mc.optimizer = optimizer_kind::sgd_momentum;

    const auto result = train_imitation(t, cache, mc);

    const std::string ckpt_path = out_path(opts, "model.ckpt");
    save_model(ckpt_path, result.model);
    std::string curves = "epoch,loss,accuracy\n";
    for (std::size_t e = 0; e < result.loss_curve.size(); ++e)
        curves += std::to_string(e) + "," + format_double(result.loss_curve[e]) + "," +
                  format_double(result.accuracy_curve[e]) + "\n";
    const std::string curves_path = out_path(opts, "training_curves.csv");
    write_text_file(curves_path, curves);

    finish_manifest(manifest, opts, {ckpt_path, curves_path});
    std::cout << "trained " << result.loss_curve.size() << " epochs, final loss "
              << format_double(result.loss_curve.back()) << ", victim agreement "
              << format_double(result.accuracy_curve.back()) << " -> " << ckpt_path << "\n";
    return 0;
}

// --- probe -------------------------------------------------------------------

int cmd_probe_pca(const common_opts& opts, const std::string& checkpoint_flag,
                  const std::string& kind_name, std::size_t k) {
    const auto cfg = load_config(opts);
    auto manifest = start_manifest("probe-pca", opts, cfg);
    const trace t = resolve_trace(cfg, opts.seed);
    const cache_config cache = cache_from_config(cfg);
    const caching_model m = load_checkpoint(cfg, checkpoint_flag, "probe pca", manifest);
    const record_kind kind = record_kind_from_string(kind_name);

    const activation_set acts = record_activations(m, t, cache);
    activation_record record;
    record.kind = kind;
    switch (kind) {
    case record_kind::hidden_state: record.data = acts.hidden; break;
    case record_kind::address_embedding: record.data = acts.embeddings; break;
    case record_kind::attention_weights: record.data = acts.attention; break;
    }

    const std::size_t kk = std::min({k, record.data.cols, record.data.rows});
    const pca_result result = pca(record.data, kk);

    const std::string record_path = out_path(opts, "record_" + kind_name + ".rec");
    const std::string pca_path = out_path(opts, "pca_" + kind_name + ".csv");
    write_record_file(record_path, record);
    write_text_file(pca_path, serialize_pca_csv(result));
    for (std::size_t c = 0; c < result.explained_variance_ratio.size(); ++c)
        manifest.parameters["explained_variance_ratio." + std::to_string(c)] =
            format_double(result.explained_variance_ratio[c]);
    finish_manifest(manifest, opts, {record_path, pca_path});

    std::cout << "pca over " << kind_name << " (" << record.data.rows << "x" << record.data.cols
              << "), top-" << kk << " -> " << pca_path << "\n";
    return 0;
}

int cmd_probe_correlate(const common_opts& opts, const std::string& pca_path,
                        const std::string& phases_path) {
    const auto cfg = load_config(opts);
    auto manifest = start_manifest("probe-correlate", opts, cfg);
    manifest.add_input(pca_path);
    manifest.add_input(phases_path);

    pca_result projections_only;
    projections_only.projections = parse_pca_csv(read_text_file(pca_path));
    const phase_labeling labeling = load_phases_file(phases_path);
    const correlation_report report = correlate_with_phases(projections_only, labeling);

    const std::string out = out_path(opts, "correlation.csv");
    write_text_file(out, serialize_correlation_csv(report));
    finish_manifest(manifest, opts, {out});

    double best = 0;
    for (const auto& r : report.r)
        if (r) best = std::max(best, std::abs(*r));
    std::cout << "correlation: " << report.num_components << " components x "
              << report.num_phases << " phases, max |r| " << format_double(best) << " -> " << out
              << "\n";
    return 0;
}

int cmd_probe_compare(const common_opts& opts, const std::string& a_path,
                      const std::string& b_path, const std::string& map_path, std::size_t k) {
    const auto cfg = load_config(opts);
    auto manifest = start_manifest("probe-compare", opts, cfg);
    manifest.add_input(a_path);
    manifest.add_input(b_path);

    const activation_record a = load_record_file(a_path);
    const activation_record b = load_record_file(b_path);
    std::vector<std::ptrdiff_t> map;
    if (map_path.empty()) {
        map = identity_map(a.data.rows);
    } else {
        manifest.add_input(map_path);
        map = load_index_map_file(map_path);
    }

    compare_result cmp;
    std::string mode;
    if (k > 0) {
        // Compare in PCA space, sign-aligning the second record's components.
        const std::size_t kk = std::min({k, a.data.cols, a.data.rows, b.data.rows});
        const pca_result pa = pca(a.data, kk);
        pca_result pb = pca(b.data, kk);
        sign_align(pb, pa);
        cmp = compare_records(pa.projections, pb.projections, map);
        mode = "pca-" + std::to_string(kk);
    } else {
        cmp = compare_records(a.data, b.data, map);
        mode = "raw";
    }

    nlohmann::json j;
    j["mode"] = mode;
    j["mean_abs_diff"] = cmp.mean_abs_diff;
    j["aligned_rows"] = cmp.aligned_rows;
    j["per_component"] = cmp.per_dim;
    const std::string out = out_path(opts, "compare.json");
    write_text_file(out, j.dump(2) + "\n");
    finish_manifest(manifest, opts, {out});

    std::cout << "compare (" << mode << "): mean abs difference "
              << format_double(cmp.mean_abs_diff) << " over " << cmp.aligned_rows
              << " aligned rows -> " << out << "\n";
    return 0;
}

int cmd_probe_embeddings(const common_opts& opts, const std::string& checkpoint_flag,
                         const std::string& sim_path, std::size_t k) {
    const auto cfg = load_config(opts);
    auto manifest = start_manifest("probe-embeddings", opts, cfg);
    const trace t = resolve_trace(cfg, opts.seed);
    const caching_model m = load_checkpoint(cfg, checkpoint_flag, "probe embeddings", manifest);

    sim_result sim;
    if (sim_path.empty()) {
        // No simulation supplied: run the model policy itself.
        model_eviction_policy policy(m);
        sim = simulate(t, cache_from_config(cfg), policy);
    } else {
        manifest.add_input(sim_path);
        const sim_csv csv = parse_sim_csv(read_text_file(sim_path));
        if (csv.hit.size() != t.size())
            throw data_error("simulation CSV does not cover the trace");
        sim.hits = csv.hit;
        for (auto h : csv.hit) sim.hit_count += h;
        sim.hit_rate = static_cast<double>(sim.hit_count) / static_cast<double>(t.size());
    }

    const embedding_report report = make_embedding_report(m, t, sim, k);
    std::string csv = "line,oov,accesses,hits,hit_rate";
    for (std::size_t c = 0; c < report.pca.projections.cols; ++c)
        csv += ",pc" + std::to_string(c);
    csv += "\n";
    for (const auto& row : report.rows) {
        csv += to_hex(row.line);
        csv += row.oov ? ",1," : ",0,";
        csv += std::to_string(row.accesses) + "," + std::to_string(row.hits) + "," +
               format_double(row.hit_rate);
        for (double p : row.projections) csv += "," + format_double(p);
        csv += "\n";
    }
    const std::string out = out_path(opts, "embedding_report.csv");
    write_text_file(out, csv);
    finish_manifest(manifest, opts, {out});

    std::cout << "embedding report: " << report.rows.size() << " lines -> " << out << "\n";
    return 0;
}

// --- plot --------------------------------------------------------------------

int cmd_plot_scatter(const common_opts& opts, const std::string& sim_path, std::size_t window) {
    const auto cfg = load_config(opts);
    auto manifest = start_manifest("plot-scatter", opts, cfg);
    manifest.add_input(sim_path);
    const sim_csv sim = parse_sim_csv(read_text_file(sim_path));
    const std::string out = out_path(opts, "plot_scatter.svg");
    write_text_file(out, svg::render_scatter(sim, window));
    finish_manifest(manifest, opts, {out});
    std::cout << "scatter plot of " << sim.hit.size() << " accesses -> " << out << "\n";
    return 0;
}

int cmd_plot_stack(const common_opts& opts, const std::vector<std::string>& sim_paths,
                   const std::string& pca_path, std::size_t window) {
    const auto cfg = load_config(opts);
    auto manifest = start_manifest("plot-stack", opts, cfg);
    std::vector<std::pair<std::string, sim_csv>> sims;
    for (const auto& path : sim_paths) {
        manifest.add_input(path);
        std::string name = fs::path(path).stem().string();
        if (name.starts_with("sim_")) name = name.substr(4);
        sims.emplace_back(name, parse_sim_csv(read_text_file(path)));
    }
    manifest.add_input(pca_path);
    const matrix pcs = parse_pca_csv(read_text_file(pca_path));

    const std::string out = out_path(opts, "plot_stack.svg");
    write_text_file(out, svg::render_stack(sims, pcs, window));
    finish_manifest(manifest, opts, {out});
    std::cout << "stack plot (" << sims.size() << " policies, " << pcs.cols << " PCs) -> " << out
              << "\n";
    return 0;
}

int cmd_plot_phases(const common_opts& opts, const std::string& phases_path) {
    const auto cfg = load_config(opts);
    auto manifest = start_manifest("plot-phases", opts, cfg);
    manifest.add_input(phases_path);
    const phase_labeling labeling = load_phases_file(phases_path);
    const std::string out = out_path(opts, "plot_phases.svg");
    write_text_file(out, svg::render_phase_bands(labeling));
    finish_manifest(manifest, opts, {out});
    std::cout << "phase band plot (" << labeling.num_phases << " phases) -> " << out << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cachescope: cache replacement policies, program phases, streams, "
                 "and learned-model probes over memory access traces"};
    app.require_subcommand(1);

    common_opts synth_opts;
    auto* synth = app.add_subcommand("synth", "generate a synthetic trace with ground truth");
    add_common(synth, synth_opts);

    common_opts sim_opts;
    std::string sim_checkpoint, sim_policies;
    auto* sim = app.add_subcommand("simulate", "run eviction policies and compare hit rates");
    add_common(sim, sim_opts);
    sim->add_option("--checkpoint", sim_checkpoint, "model checkpoint for the model policy");
    sim->add_option("--policies", sim_policies,
                    "comma-separated policy list, overriding the config's policy.list");

    common_opts phases_opts;
    auto* phases = app.add_subcommand("phases", "extract program phases");
    add_common(phases, phases_opts);

    auto* streams = app.add_subcommand("streams", "detect or edit streams");
    streams->require_subcommand(1);
    common_opts sdetect_opts;
    auto* sdetect = streams->add_subcommand("detect", "detect strided streams");
    add_common(sdetect, sdetect_opts);

    common_opts sremove_opts;
    std::optional<std::size_t> sremove_id;
    std::optional<std::uint64_t> sremove_base;
    std::optional<std::int64_t> sremove_stride;
    auto* sremove = streams->add_subcommand("remove", "delete a detected stream from the trace");
    add_common(sremove, sremove_opts);
    sremove->add_option("--id", sremove_id, "stream id from `streams detect`");
    sremove->add_option("--base", sremove_base, "stream base address");
    sremove->add_option("--stride", sremove_stride, "stream stride in bytes");

    common_opts skeep_opts;
    std::optional<std::size_t> skeep_id;
    std::optional<std::uint64_t> skeep_base;
    std::optional<std::int64_t> skeep_stride;
    double skeep_fraction = 1.0;
    auto* skeep = streams->add_subcommand("keep-suffix", "keep only the end part of a stream");
    add_common(skeep, skeep_opts);
    skeep->add_option("--id", skeep_id, "stream id from `streams detect`");
    skeep->add_option("--base", skeep_base, "stream base address");
    skeep->add_option("--stride", skeep_stride, "stream stride in bytes");
    skeep->add_option("--fraction", skeep_fraction, "fraction of the stream to keep, (0,1]")
        ->required();

    common_opts train_opts;
    auto* train = app.add_subcommand("train", "clone the optimal policy into a model");
    add_common(train, train_opts);

    auto* probe = app.add_subcommand("probe", "inspect model internals");
    probe->require_subcommand(1);

    common_opts ppca_opts;
    std::string ppca_checkpoint, ppca_kind = "hidden-state";
    std::size_t ppca_k = 5;
    auto* ppca = probe->add_subcommand("pca", "record activations and decompose them");
    add_common(ppca, ppca_opts);
    ppca->add_option("--checkpoint", ppca_checkpoint, "model checkpoint");
    ppca->add_option("--kind", ppca_kind,
                     "record kind: hidden-state, address-embedding, attention-weights");
    ppca->add_option("--components", ppca_k, "number of principal components");

    common_opts pcorr_opts;
    std::string pcorr_pca, pcorr_phases;
    auto* pcorr = probe->add_subcommand("correlate", "correlate PC series with phases");
    add_common(pcorr, pcorr_opts, false);
    pcorr->add_option("--pca", pcorr_pca, "PCA projections CSV")->required();
    pcorr->add_option("--phases", pcorr_phases, "phase sidecar file")->required();

    common_opts pcmp_opts;
    std::string pcmp_a, pcmp_b, pcmp_map;
    std::size_t pcmp_k = 0;
    auto* pcmp = probe->add_subcommand("compare", "mean absolute difference of two records");
    add_common(pcmp, pcmp_opts, false);
    pcmp->add_option("--a", pcmp_a, "first activation record")->required();
    pcmp->add_option("--b", pcmp_b, "second activation record")->required();
    pcmp->add_option("--map", pcmp_map, "old->new index map from a trace edit");
    pcmp->add_option("--components", pcmp_k,
                     "compare top-k PCA projections (sign-aligned) instead of raw records");

    common_opts pemb_opts;
    std::string pemb_checkpoint, pemb_sim;
    std::size_t pemb_k = 3;
    auto* pemb = probe->add_subcommand("embeddings", "join embedding PCs with hit statistics");
    add_common(pemb, pemb_opts);
    pemb->add_option("--checkpoint", pemb_checkpoint, "model checkpoint");
    pemb->add_option("--sim", pemb_sim, "simulation CSV (defaults to a fresh model rollout)");
    pemb->add_option("--components", pemb_k, "number of principal components");

    auto* plot = app.add_subcommand("plot", "render SVG reports");
    plot->require_subcommand(1);

    common_opts pscat_opts;
    std::string pscat_sim;
    std::size_t pscat_window = 100;
    auto* pscat = plot->add_subcommand("scatter", "access scatter with rolling hit rate");
    add_common(pscat, pscat_opts, false);
    pscat->add_option("--sim", pscat_sim, "simulation CSV")->required();
    pscat->add_option("--window", pscat_window, "rolling mean window");

    common_opts pstack_opts;
    std::vector<std::string> pstack_sims;
    std::string pstack_pca;
    std::size_t pstack_window = 100;
    auto* pstack = plot->add_subcommand("stack", "trace, PC series, and per-policy hit rates");
    add_common(pstack, pstack_opts, false);
    pstack->add_option("--sim", pstack_sims, "simulation CSVs (repeatable)")->required();
    pstack->add_option("--pca", pstack_pca, "PCA projections CSV")->required();
    pstack->add_option("--window", pstack_window, "rolling mean window");

    common_opts pband_opts;
    std::string pband_phases;
    auto* pband = plot->add_subcommand("phases", "phase bands over the timeline");
    add_common(pband, pband_opts, false);
    pband->add_option("--phases", pband_phases, "phase sidecar file")->required();

    try {
        app.parse(argc, argv);
        if (synth->parsed()) return cmd_synth(synth_opts);
        if (sim->parsed()) return cmd_simulate(sim_opts, sim_checkpoint, sim_policies);
        if (phases->parsed()) return cmd_phases(phases_opts);
        if (sdetect->parsed()) return cmd_streams_detect(sdetect_opts);
        if (sremove->parsed())
            return cmd_streams_edit(sremove_opts, false, 1.0, sremove_id, sremove_base,
                                    sremove_stride);
        if (skeep->parsed())
            return cmd_streams_edit(skeep_opts, true, skeep_fraction, skeep_id, skeep_base,
                                    skeep_stride);
        if (train->parsed()) return cmd_train(train_opts);
        if (ppca->parsed()) return cmd_probe_pca(ppca_opts, ppca_checkpoint, ppca_kind, ppca_k);
        if (pcorr->parsed()) return cmd_probe_correlate(pcorr_opts, pcorr_pca, pcorr_phases);
        if (pcmp->parsed()) return cmd_probe_compare(pcmp_opts, pcmp_a, pcmp_b, pcmp_map, pcmp_k);
        if (pemb->parsed()) return cmd_probe_embeddings(pemb_opts, pemb_checkpoint, pemb_sim, pemb_k);
        if (pscat->parsed()) return cmd_plot_scatter(pscat_opts, pscat_sim, pscat_window);
        if (pstack->parsed()) return cmd_plot_stack(pstack_opts, pstack_sims, pstack_pca, pstack_window);
        if (pband->parsed()) return cmd_plot_phases(pband_opts, pband_phases);
        throw usage_error("no subcommand selected");
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const usage_error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const internal_error& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
