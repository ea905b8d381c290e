// Copyright 2026 The scfilter Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "scf/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "scf/error.hpp"
#include "scf/losses.hpp"
#include "scf/map_io.hpp"
#include "scf/rng.hpp"
#include "scf/sequence_io.hpp"

namespace scf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kMeasurementStream = 0x6d656173;
constexpr double kDefaultNisAlpha = 0.05;
constexpr std::uint64_t kRansacStream = 0x72616e73;

double mean_loss(const LossResult& r) {
  return r.pixels ? r.total / static_cast<double>(r.pixels) : 0.0;
}

std::string frame_name(const char* stem, int i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04d.%s", stem, i, ext);
  return buf;
}

void dump_diagnostics(const fs::path& path, const FusionDiagnostics& d) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << "pixel,nis,gain,rejected\n";
  for (std::size_t i = 0; i < d.fused.size(); ++i) {
    if (!d.fused[i]) continue;
    out << i << ',' << fmt_num(d.nis[i]) << ',' << fmt_num(d.kalman_gain[i]) << ','
        << int(d.nis_rejected[i]) << '\n';
  }
}

}  // namespace

std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

SceneModel build_scene(const PipelineConfig& cfg) {
  SceneModel s = cfg.scene.kind == "plane"
                     ? make_plane_scene(cfg.scene.seed, cfg.scene.plane_z, cfg.scene.plane_x_min,
                                        cfg.scene.plane_x_max, cfg.scene.plane_half_height)
                     : make_room_scene(cfg.scene.seed);
  if (cfg.scene.occluders > 0) add_occluders(&s, cfg.scene.occluders, cfg.scene.seed);
  return s;
}

Trajectory build_trajectory(const PipelineConfig& cfg) {
  const auto& t = cfg.trajectory;
  if (t.kind == "static") return make_static_trajectory(t.frames, t.fps);
  if (t.kind == "translation") return make_translation_trajectory(t.frames, t.fps, t.step);
  return make_sweep_trajectory(t.frames, t.fps, t.amplitude);
}

std::size_t simulate_sequence(const PipelineConfig& cfg, const std::string& dir) {
  cfg.validate();
  SequenceGenerator gen(build_scene(cfg), build_trajectory(cfg), cfg.camera, cfg.degradation,
                        cfg.seed, cfg.stride);
  SequenceWriter writer(dir, cfg.camera, cfg.stride);
  std::size_t n = 0;
  while (auto f = gen.next()) {
    writer.add(*f);
    ++n;
  }
  writer.finish();
  return n;
}

namespace {

// Per-frame work that does not depend on the fusion mode.
struct SharedFrame {
  FrameBundle frame;
  std::optional<FlowField> flow;  // absent at frame 0
  std::optional<FlowField> back;
  std::size_t flow_cells = 0;
  std::size_t flow_within = 0;
};

// Fields that decide the frames and the flow; runs agreeing on them can share both.
std::string frame_key(const PipelineConfig& cfg) {
  json j = config_to_json(cfg);
  json key = {j["scene"], j["trajectory"], j["camera"], j["degradation"], j["flow"],
              j["stride"], j["window_size"], j["seed"], cfg.sequence};
  return key.dump();
}

class Lane {
 public:
  Lane(const PipelineConfig& cfg, const RunOptions& opts) : cfg_(cfg), opts_(opts) {
    write_ = opts.write_outputs && !cfg.output_dir.empty();
    out_dir_ = cfg.output_dir;
    if (write_) {
      std::error_code ec;
      fs::create_directories(out_dir_, ec);
      if (opts.dump_diagnostics) fs::create_directories(out_dir_ / "diagnostics", ec);
      if (opts.dump_flow) fs::create_directories(out_dir_ / "flow", ec);
      if (ec) fail(ErrorCode::kIo, "cannot create " + cfg.output_dir + ": " + ec.message());
    }
    rep_.config = cfg;
  }

  void step(const SharedFrame& sf) {
    const FrameBundle& f = sf.frame;
    const auto t0 = std::chrono::steady_clock::now();
    FrameRecord rec;
    rec.index = f.index;
    rec.timestamp = f.timestamp;
    rec.blurred = f.has_tag(Degradation::kBlurred);
    rec.trimmed_restart = f.has_tag(Degradation::kTrimmedRestart);
    rec.gt = f.gt_pose;
    rec.flow_cells = sf.flow_cells;
    rec.flow_within = sf.flow_within;

    try {
      process(sf, &rec);
    } catch (const Error& e) {
      throw Error(e.code(), "frame " + std::to_string(f.index) + ": " + e.what());
    }

    rec.error = rec.pose_ok ? pose_error(rec.estimate, rec.gt)
                            : PoseError{std::numeric_limits<double>::infinity(),
                                        std::numeric_limits<double>::infinity()};
    samples_.push_back({rec.pose_ok ? std::optional<Pose>(rec.estimate) : std::nullopt, rec.gt});
    rep_.fused += rec.fused;
    rep_.rejected += rec.rejected;
    rep_.nis_exceeded += rec.nis_exceeded;
    rep_.flow_cells += rec.flow_cells;
    rep_.flow_within += rec.flow_within;
    coord_sum_ += rec.coord.mean * rec.coord.pixels;
    coord_n_ += rec.coord.pixels;
    meas_sum_ += rec.measurement.mean * rec.measurement.pixels;
    meas_n_ += rec.measurement.pixels;
    rec.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    rep_.frames.push_back(std::move(rec));
  }

  RunReport finish(double shared_seconds) {
    if (rep_.frames.empty()) fail(ErrorCode::kEmptyInput, "sequence has no frames");
    rep_.metrics = pose_metrics(samples_, rep_.posteriors, gt_maps_);
    rep_.mean_coord_error = coord_n_ ? coord_sum_ / coord_n_ : 0.0;
    rep_.mean_measurement_error = meas_n_ ? meas_sum_ / meas_n_ : 0.0;
    double ms = 0.0;
    for (const auto& r : rep_.frames) ms += r.millis;
    rep_.wall_seconds = shared_seconds + ms / 1000.0;
    if (write_) {
      write_run_outputs(cfg_.output_dir, rep_);
      if (opts_.save_maps) {
        std::error_code ec;
        fs::create_directories(out_dir_ / "posteriors", ec);
        for (std::size_t i = 0; i < rep_.posteriors.size(); ++i)
          save_kfsc((out_dir_ / "posteriors" / frame_name("frame", rep_.frames[i].index, "kfsc")).string(),
                    rep_.posteriors[i]);
      }
    }
    return std::move(rep_);
  }

 private:
  void process(const SharedFrame& sf, FrameRecord* rec) {
    const FrameBundle& f = sf.frame;
    const CoordStateMap meas =
        synthesize_measurement(f.cell_coords, cfg_.measurement,
                               hash_combine(hash_combine(cfg_.seed, kMeasurementStream), f.index),
                               rec->blurred);
    CoordStateMap post;
    std::optional<CoordStateMap> prior;
    if (!posterior_ || !sf.flow) {
      post = meas;
    } else {
      const FlowField& flow = *sf.flow;
      if (write_ && opts_.dump_flow)
        save_flow_ppm((out_dir_ / "flow" / frame_name("frame", f.index, "ppm")).string(), flow,
                      cfg_.flow.search_stride * (cfg_.window_size / 2));
      prior = assemble_prior(warp_state(*posterior_, flow), flow, cfg_.process, sf.back);
      for (auto& h : history_) h = warp_state(h, flow);

      switch (cfg_.fusion_mode) {
        case FusionMode::kKalman: {
          KalmanResult kr = kalman_update(*prior, meas, cfg_.nis_alpha);
          rec->fused = kr.diagnostics.fused_count();
          rec->rejected = kr.diagnostics.rejected_count();
          rec->nis_exceeded = kr.diagnostics.exceed_count(cfg_.nis_alpha.value_or(kDefaultNisAlpha));
          if (write_ && opts_.dump_diagnostics)
            dump_diagnostics(out_dir_ / "diagnostics" / frame_name("frame", f.index, "csv"),
                             kr.diagnostics);
          post = std::move(kr.posterior);
          break;
        }
        case FusionMode::kTPooler:
        case FusionMode::kSWeight: {
          const std::vector<CoordStateMap> neighbors(history_.begin(), history_.end());
          post = fuse_baseline(neighbors, meas,
                               cfg_.fusion_mode == FusionMode::kTPooler ? BaselineMode::kTPooler
                                                                        : BaselineMode::kSWeight,
                               cfg_.baseline.sim_temp);
          break;
        }
        case FusionMode::kMeasurementOnly:
          post = meas;
          break;
      }
    }
    history_.push_back(meas);
    while (static_cast<int>(history_.size()) > cfg_.baseline.history) history_.pop_front();

    rec->loss_likelihood = mean_loss(likelihood_loss(meas, f.cell_coords));
    if (prior) rec->loss_prior = mean_loss(prior_loss(*prior, f.cell_coords));
    rec->loss_posterior = mean_loss(posterior_loss(post, f.cell_coords));
    rec->loss_full = full_loss(rec->loss_likelihood, rec->loss_prior, rec->loss_posterior, cfg_.loss);
    rec->coord = coordinate_error(post, f.cell_coords);
    rec->measurement = coordinate_error(meas, f.cell_coords);

    try {
      const auto corrs = gather_correspondences(post, cfg_.camera, cfg_.ransac.lambda_m);
      rec->correspondences = static_cast<int>(corrs.size());
      const PoseEstimate est =
          ransac_pnp(corrs, cfg_.camera, cfg_.ransac,
                     hash_combine(hash_combine(cfg_.seed, kRansacStream), f.index));
      rec->pose_ok = true;
      rec->estimate = est.pose;
      rec->inliers = est.inlier_count;
      rec->ransac_iterations = est.iterations_used;
      rec->reproj_err_px = est.mean_reproj_err_px;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoConsensus && e.code() != ErrorCode::kTooFewCorrespondences &&
          e.code() != ErrorCode::kDiverged)
        throw;
      rec->failure = to_string(e.code());
    }

    posterior_ = post;
    rep_.posteriors.push_back(std::move(post));
    gt_maps_.push_back(f.cell_coords);
  }

  PipelineConfig cfg_;
  RunOptions opts_;
  bool write_ = false;
  fs::path out_dir_;
  RunReport rep_;
  std::optional<CoordStateMap> posterior_;
  std::deque<CoordStateMap> history_;
  std::vector<PoseSample> samples_;
  std::vector<CoordStateMap> gt_maps_;
  double coord_sum_ = 0.0, meas_sum_ = 0.0;
  std::size_t coord_n_ = 0, meas_n_ = 0;
};

// Runs configs that share a frame key in lockstep over one frame source.
std::vector<RunReport> run_group(std::vector<PipelineConfig> cfgs, const RunOptions& opts) {
  PipelineConfig& lead = cfgs.front();
  std::function<std::optional<FrameBundle>()> next;
  std::optional<SequenceGenerator> gen;
  std::optional<SequenceReader> reader;
  if (lead.sequence.empty()) {
    gen.emplace(build_scene(lead), build_trajectory(lead), lead.camera, lead.degradation, lead.seed,
                lead.stride);
    next = [&] { return gen->next(); };
  } else {
    reader.emplace(lead.sequence);
    for (auto& c : cfgs) {
      c.camera = reader->camera();
      c.stride = reader->stride();
      c.validate();
    }
    next = [&] { return reader->next(); };
  }
  const PipelineConfig& cfg = cfgs.front();

  std::vector<Lane> lanes;
  for (const auto& c : cfgs) lanes.emplace_back(c, opts);

  std::optional<FeatureMap> prev_cells;
  std::optional<FeatureMap> prev_dense;
  double shared_seconds = 0.0;
  while (true) {
    const auto t0 = std::chrono::steady_clock::now();
    SharedFrame sf;
    // The generator names the failing frame itself.
    std::optional<FrameBundle> fb = next();
    if (!fb) break;
    sf.frame = std::move(*fb);
    try {
      const FrameBundle& f = sf.frame;
      if (cfg.flow.source == FlowSource::kGroundTruth) {
        if (f.index > 0) sf.flow = f.cell_flow;
      } else {
        auto describe = [&](int step) {
          if (cfg.flow.context)
            return extract_context_features(f.image, cfg.stride, step, cfg.flow.descriptor);
          return step == cfg.stride ? extract_features(f.image, cfg.stride)
                                    : extract_dense_features(f.image, cfg.stride, step);
        };
        FeatureMap cells = describe(cfg.stride);
        FeatureMap dense = cfg.flow.search_stride == cfg.stride ? cells : describe(cfg.flow.search_stride);
        if (prev_cells) {
          sf.flow = flow_from_volume(build_cost_volume(*prev_dense, cells, cfg.window_size),
                                     cfg.flow.temperature);
          sf.back = flow_from_volume(build_cost_volume(dense, *prev_cells, cfg.window_size),
                                     cfg.flow.temperature);
          for (std::size_t i = 0; i < sf.flow->size(); ++i) {
            if (!sf.flow->valid[i] || !f.cell_flow.valid[i]) continue;
            ++sf.flow_cells;
            if ((sf.flow->offsets[i] - f.cell_flow.offsets[i]).norm() <= 0.5 * cfg.stride)
              ++sf.flow_within;
          }
        }
        prev_cells = std::move(cells);
        prev_dense = std::move(dense);
      }
    } catch (const Error& e) {
      throw Error(e.code(), "frame " + std::to_string(sf.frame.index) + ": " + e.what());
    }
    shared_seconds +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (auto& lane : lanes) lane.step(sf);
  }

  std::vector<RunReport> out;
  for (auto& lane : lanes) out.push_back(lane.finish(shared_seconds));
  return out;
}

}  // namespace

std::vector<RunReport> run_sequences(std::span<const PipelineConfig> cfgs, const RunOptions& opts) {
  std::vector<std::string> keys;
  for (const auto& c : cfgs) {
    c.validate();
    keys.push_back(frame_key(c));
  }
  std::vector<RunReport> out(cfgs.size());
  std::vector<bool> done(cfgs.size(), false);
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    if (done[i]) continue;
    std::vector<std::size_t> members;
    for (std::size_t j = i; j < cfgs.size(); ++j)
      if (!done[j] && keys[j] == keys[i]) members.push_back(j);
    std::vector<PipelineConfig> group;
    for (auto j : members) group.push_back(cfgs[j]);
    auto reports = run_group(std::move(group), opts);
    for (std::size_t m = 0; m < members.size(); ++m) {
      out[members[m]] = std::move(reports[m]);
      done[members[m]] = true;
    }
  }
  return out;
}

RunReport run_sequence(const PipelineConfig& cfg, const RunOptions& opts) {
  return std::move(run_sequences(std::span<const PipelineConfig>(&cfg, 1), opts).front());
}

std::size_t export_point_cloud(std::span<const CoordStateMap> maps, double lambda_m,
                               const std::string& path) {
  if (maps.empty()) fail(ErrorCode::kEmptyInput, "no maps to export");
  std::vector<std::pair<double, Eigen::Vector3d>> pts;
  const double max_var = lambda_m * lambda_m;
  for (const auto& m : maps) {
    for (std::size_t i = 0; i < m.valid.size(); ++i) {
      if (!m.valid[i]) continue;
      const double v = m.variance(i);
      if (v <= max_var && lambda_m > 0.0) pts.emplace_back(v, m.coords[i]);
    }
  }
  // Gray level by variance rank, lowest variance brightest.
  std::vector<std::size_t> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pts[a].first < pts[b].first; });
  std::vector<PlyPoint> out(pts.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    const double frac = order.size() > 1 ? static_cast<double>(r) / (order.size() - 1) : 0.0;
    out[order[r]] = {pts[order[r]].second, static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - frac)))};
  }
  save_ply(path, out);
  return out.size();
}

void write_report_csv(std::ostream& os, const RunReport& rep) {
  os << "frame,timestamp,blurred,trimmed_restart,pose_ok,failure,t_err_m,r_err_deg,"
        "correspondences,inliers,ransac_iters,reproj_px,coord_err_mean,coord_err_std,coord_pixels,"
        "meas_err_mean,fused,rejected,rejection_rate,nis_exceeded,flow_cells,flow_within,loss_likelihood,"
        "loss_prior,loss_posterior,loss_full,qw,qx,qy,qz,tx,ty,tz\n";
  for (const auto& r : rep.frames) {
    const auto& q = r.estimate.rotation;
    const auto& t = r.estimate.translation;
    os << r.index << ',' << fmt_num(r.timestamp) << ',' << r.blurred << ',' << r.trimmed_restart
       << ',' << r.pose_ok << ',' << r.failure << ',' << fmt_num(r.error.translation_m) << ','
       << fmt_num(r.error.rotation_deg) << ',' << r.correspondences << ',' << r.inliers << ','
       << r.ransac_iterations << ',' << fmt_num(r.reproj_err_px) << ',' << fmt_num(r.coord.mean)
       << ',' << fmt_num(r.coord.stddev) << ',' << r.coord.pixels << ','
       << fmt_num(r.measurement.mean) << ',' << r.fused << ',' << r.rejected << ','
       << fmt_num(r.rejection_rate()) << ',' << r.nis_exceeded << ',' << r.flow_cells << ',' << r.flow_within << ','
       << fmt_num(r.loss_likelihood) << ',' << fmt_num(r.loss_prior) << ','
       << fmt_num(r.loss_posterior) << ',' << fmt_num(r.loss_full);
    if (r.pose_ok)
      os << ',' << fmt_num(q.w()) << ',' << fmt_num(q.x()) << ',' << fmt_num(q.y()) << ','
         << fmt_num(q.z()) << ',' << fmt_num(t.x()) << ',' << fmt_num(t.y()) << ','
         << fmt_num(t.z());
    else
      os << ",,,,,,,";
    os << '\n';
  }
}

json summary_json(const RunReport& rep) {
  json j;
  j["frames"] = rep.frames.size();
  j["fusion_mode"] = to_string(rep.config.fusion_mode);
  j["median_translation_m"] = rep.metrics.median_translation_m;
  j["median_rotation_deg"] = rep.metrics.median_rotation_deg;
  j["accuracy_5cm_5deg"] = rep.metrics.accuracy_5cm_5deg;
  j["failed_frames"] = std::count_if(rep.frames.begin(), rep.frames.end(),
                                     [](const FrameRecord& r) { return !r.pose_ok; });
  j["mean_coord_error_m"] = rep.mean_coord_error;
  j["mean_measurement_error_m"] = rep.mean_measurement_error;
  if (rep.metrics.coords) j["coord_error_std_m"] = rep.metrics.coords->stddev;
  j["nis_fused_pixels"] = rep.fused;
  j["nis_rejected_pixels"] = rep.rejected;
  j["nis_rejection_rate"] = rep.rejection_rate();
  j["nis_exceed_rate"] = rep.nis_exceed_rate();
  j["flow_cells"] = rep.flow_cells;
  j["flow_accuracy"] = rep.flow_accuracy();
  double ms = 0.0;
  for (const auto& r : rep.frames) ms += r.millis;
  j["timings"] = {{"wall_seconds", rep.wall_seconds},
                  {"mean_frame_ms", ms / static_cast<double>(rep.frames.size())}};
  j["config"] = config_to_json(rep.config);
  PipelineConfig defaults;
  j["defaults"] = {{"loss_weights", {defaults.loss.tau1, defaults.loss.tau2, defaults.loss.tau3}},
                   {"lambda_m", defaults.ransac.lambda_m},
                   {"nis_alpha", *defaults.nis_alpha},
                   {"window_size", defaults.window_size},
                   {"stride", defaults.stride},
                   {"flow_temperature", defaults.flow.temperature}};
  return j;
}

void write_run_outputs(const std::string& dir, const RunReport& rep) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create " + dir + ": " + ec.message());
  const fs::path d(dir);
  {
    std::ofstream out(d / "report.csv");
    if (!out) fail(ErrorCode::kIo, "cannot write report.csv in " + dir);
    write_report_csv(out, rep);
  }
  {
    std::ofstream out(d / "summary.json");
    if (!out) fail(ErrorCode::kIo, "cannot write summary.json in " + dir);
    out << summary_json(rep).dump(2) << '\n';
  }
  export_point_cloud(rep.posteriors, rep.config.ransac.lambda_m, (d / "cloud.ply").string());
}

}  // namespace scf
