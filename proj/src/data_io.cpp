#include "osp/data_io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "osp/errors.hpp"

namespace osp {

namespace {

using Json = nlohmann::json;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

double parse_double(const std::string& field, std::size_t line, const std::string& column) {
  if (field.empty()) throw DataError(at_line(line) + "empty " + column);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(field.c_str(), &end);
  if (end != field.c_str() + field.size() || errno == ERANGE || !std::isfinite(v)) {
    throw DataError(at_line(line) + "bad " + column + " value '" + field + "'");
  }
  return v;
}

long parse_long(const std::string& field, std::size_t line, const std::string& column) {
  if (field.empty()) throw DataError(at_line(line) + "empty " + column);
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(field.c_str(), &end, 10);
  if (end != field.c_str() + field.size() || errno == ERANGE) {
    throw DataError(at_line(line) + "bad " + column + " value '" + field + "'");
  }
  return v;
}

/// Column lookup by any of several accepted names.
class Header {
 public:
  explicit Header(const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i) index_[lower(names[i])] = i;
    width_ = names.size();
  }

  std::optional<std::size_t> find(std::initializer_list<const char*> names) const {
    for (const char* n : names) {
      const auto it = index_.find(n);
      if (it != index_.end()) return it->second;
    }
    return std::nullopt;
  }

  std::size_t require(std::initializer_list<const char*> names) const {
    if (auto i = find(names)) return *i;
    throw DataError(std::string("schema error: missing required column '") + *names.begin() + "'");
  }

  std::size_t width() const { return width_; }

 private:
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t width_ = 0;
};

std::optional<AgentClass> class_of(const std::string& raw, Schema schema) {
  const std::string c = lower(raw);
  if (c == "pedestrian") return AgentClass::kPedestrian;
  if (c == "vehicle") return AgentClass::kVehicle;
  if (c == "other") return AgentClass::kOther;
  if (schema == Schema::kInd) {
    if (c == "car" || c == "truck_bus" || c == "truck" || c == "bus" || c == "van") return AgentClass::kVehicle;
    if (c == "bicycle" || c == "motorcycle") return AgentClass::kOther;
  }
  if (schema == Schema::kDut) {
    if (c == "ped" || c == "p") return AgentClass::kPedestrian;
    if (c == "veh" || c == "car" || c == "v") return AgentClass::kVehicle;
  }
  return std::nullopt;
}

/// Per-file data for the ind preset: class by track id and the frame rate.
struct IndMeta {
  std::unordered_map<long, std::string> cls;
  std::optional<double> rate;
};

IndMeta read_ind_meta(const std::string& tracks_path) {
  namespace fs = std::filesystem;
  IndMeta meta;
  const fs::path p(tracks_path);
  std::string stem = p.filename().string();
  const auto pos = stem.rfind("tracks.csv");
  if (pos == std::string::npos) throw DataError("ind schema expects a *tracks.csv file, got " + stem);
  const std::string prefix = stem.substr(0, pos);
  const fs::path meta_path = p.parent_path() / (prefix + "tracksMeta.csv");
  std::ifstream in(meta_path);
  if (!in) throw DataError("cannot open " + meta_path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty " + meta_path.string());
  const Header h(split_csv(line));
  const auto id_col = h.require({"trackid"});
  const auto cls_col = h.require({"class"});
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    if (f.size() < h.width()) throw DataError(meta_path.string() + " " + at_line(n) + "too few fields");
    meta.cls[parse_long(f[id_col], n, "trackId")] = f[cls_col];
  }
  const fs::path rec_path = p.parent_path() / (prefix + "recordingMeta.csv");
  std::ifstream rec(rec_path);
  if (rec && std::getline(rec, line)) {
    const Header rh(split_csv(line));
    std::string values;
    if (auto col = rh.find({"framerate"}); col && std::getline(rec, values)) {
      const auto f = split_csv(values);
      if (*col < f.size()) meta.rate = parse_double(f[*col], 2, "frameRate");
    }
  }
  return meta;
}

RawTrackTable parse_impl(std::istream& in, const LoadOptions& options, const IndMeta* ind) {
  RawTrackTable table;
  switch (options.schema) {
    case Schema::kGeneric: table.rate_hz = 10.0; break;
    case Schema::kInd: table.rate_hz = (ind && ind->rate) ? *ind->rate : 25.0; break;
    case Schema::kDut: table.rate_hz = 23.98; break;
  }
  if (options.rate_hz > 0.0) table.rate_hz = options.rate_hz;
  if (!(table.rate_hz > 0.0) || !std::isfinite(table.rate_hz)) throw DataError("frame rate must be positive");

  std::string line;
  if (!std::getline(in, line)) throw DataError("schema error: missing header line");
  const Header h(split_csv(line));

  std::size_t c_id = 0, c_frame = 0, c_x = 0, c_y = 0;
  std::optional<std::size_t> c_cls, c_vx, c_vy;
  switch (options.schema) {
    case Schema::kGeneric:
      c_id = h.require({"track_id"});
      c_cls = h.require({"class"});
      c_frame = h.require({"frame"});
      c_x = h.require({"x_m"});
      c_y = h.require({"y_m"});
      c_vx = h.find({"vx_mps"});
      c_vy = h.find({"vy_mps"});
      break;
    case Schema::kInd:
      c_id = h.require({"trackid"});
      c_frame = h.require({"frame"});
      c_x = h.require({"xcenter"});
      c_y = h.require({"ycenter"});
      c_vx = h.find({"xvelocity"});
      c_vy = h.find({"yvelocity"});
      break;
    case Schema::kDut:
      c_id = h.require({"id", "track_id"});
      c_cls = h.require({"label", "class", "type"});
      c_frame = h.require({"frame"});
      c_x = h.require({"x_est", "x", "x_m"});
      c_y = h.require({"y_est", "y", "y_m"});
      c_vx = h.find({"vx_est", "vx", "vx_mps"});
      c_vy = h.find({"vy_est", "vy", "vy_mps"});
      break;
  }
  if (c_vx.has_value() != c_vy.has_value()) throw DataError("schema error: velocity needs both x and y columns");

  std::set<std::pair<int, long>> seen;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    ++table.input_rows;
    const auto f = split_csv(line);
    if (f.size() != h.width()) {
      throw DataError(at_line(n) + "expected " + std::to_string(h.width()) + " fields, got " +
                      std::to_string(f.size()));
    }
    RawRow row;
    row.line = n;
    const long id = parse_long(f[c_id], n, "track id");
    row.track_id = static_cast<int>(id);
    row.frame = parse_long(f[c_frame], n, "frame");
    std::string cls_name;
    if (c_cls) {
      cls_name = f[*c_cls];
    } else {
      const auto it = ind->cls.find(id);
      if (it == ind->cls.end()) throw DataError(at_line(n) + "track " + std::to_string(id) + " missing from tracksMeta");
      cls_name = it->second;
    }
    const auto cls = class_of(cls_name, options.schema);
    if (!cls) {
      ++table.dropped;
      continue;
    }
    row.cls = *cls;
    row.pos = Vec2(parse_double(f[c_x], n, "x"), parse_double(f[c_y], n, "y"));
    if (c_vx && !f[*c_vx].empty() && !f[*c_vy].empty()) {
      row.vel = Vec2(parse_double(f[*c_vx], n, "vx"), parse_double(f[*c_vy], n, "vy"));
    }
    if (!seen.insert({row.track_id, row.frame}).second) {
      throw DataError(at_line(n) + "duplicate (track_id=" + std::to_string(row.track_id) +
                      ", frame=" + std::to_string(row.frame) + ")");
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

struct Segment {
  int id;
  int index;
  AgentClass cls;
  std::vector<const RawRow*> rows;
};

/// Position (and velocity, when every row has one) at fractional frame u.
std::pair<Vec2, std::optional<Vec2>> interpolate(const Segment& seg, double u) {
  const long f0 = seg.rows.front()->frame;
  const double rel = u - static_cast<double>(f0);
  auto i = static_cast<std::size_t>(std::floor(rel));
  if (i + 1 >= seg.rows.size()) i = seg.rows.size() - 1;
  const double a = rel - static_cast<double>(i);
  const RawRow& r0 = *seg.rows[i];
  if (a <= 0.0 || i + 1 >= seg.rows.size()) return {r0.pos, r0.vel};
  const RawRow& r1 = *seg.rows[i + 1];
  const Vec2 pos = (1.0 - a) * r0.pos + a * r1.pos;
  std::optional<Vec2> vel;
  if (r0.vel && r1.vel) vel = (1.0 - a) * *r0.vel + a * *r1.vel;
  return {pos, vel};
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// --- model JSON ---

Json params_json(const ModelParams& p) {
  Json j;
  j["scene"] = {{"half_length", p.scene.half_length},
                {"u_max", p.scene.u_max},
                {"dt", p.scene.dt},
                {"stationary_speed", p.scene.stationary_speed}};
  j["sigma_v"] = p.sigma_v;
  j["sigma_x"] = p.sigma_x;
  j["influence"] = {{"u_max", p.influence.u_max()}, {"weights", p.influence.weights()}};
  j["risk"] = {{"n_b", p.risk_fn.n_b()},
               {"lo", p.risk_fn.lo()},
               {"hi", p.risk_fn.hi()},
               {"weights", p.risk_fn.weights()},
               {"bias", p.risk_fn.bias()}};
  return j;
}

ModelParams params_from_json(const Json& j) {
  ModelParams p;
  const Json& s = j.at("scene");
  p.scene.half_length = s.at("half_length").get<double>();
  p.scene.u_max = s.at("u_max").get<double>();
  p.scene.dt = s.at("dt").get<double>();
  p.scene.stationary_speed = s.at("stationary_speed").get<double>();
  p.sigma_v = j.at("sigma_v").get<double>();
  p.sigma_x = j.at("sigma_x").get<double>();
  const Json& u = j.at("influence");
  p.influence = GridFunction1D(u.at("weights").get<std::vector<double>>(), u.at("u_max").get<double>());
  const Json& b = j.at("risk");
  p.risk_fn = GridFunction2D(b.at("weights").get<std::vector<double>>(), b.at("bias").get<double>(),
                             b.at("lo").get<double>(), b.at("hi").get<double>(), b.at("n_b").get<std::size_t>());
  return p;
}

}  // namespace

std::size_t RawTrackTable::count(AgentClass cls) const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [&](const RawRow& r) { return r.cls == cls; }));
}

Schema parse_schema(const std::string& name) {
  const std::string n = lower(name);
  if (n == "generic") return Schema::kGeneric;
  if (n == "ind") return Schema::kInd;
  if (n == "dut") return Schema::kDut;
  throw ContractViolation("unknown schema '" + name + "' (expected generic, ind or dut)");
}

RawTrackTable parse_tracks(std::istream& in, const LoadOptions& options) {
  if (options.schema == Schema::kInd) throw ContractViolation("ind schema needs a file path for its metadata");
  return parse_impl(in, options, nullptr);
}

RawTrackTable load_tracks(const std::string& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  if (options.schema == Schema::kInd) {
    const IndMeta meta = read_ind_meta(path);
    return parse_impl(in, options, &meta);
  }
  return parse_impl(in, options, nullptr);
}

Scene resample(const RawTrackTable& table, double target_hz) {
  if (!(target_hz > 0.0)) throw ContractViolation("target rate must be positive");
  if (table.rate_hz < target_hz * (1.0 - 1e-9)) {
    throw DataError("native rate " + fmt(table.rate_hz) + " Hz is below " + fmt(target_hz) + " Hz; upsampling refused");
  }
  const double ratio = table.rate_hz / target_hz;  // native frames per output step

  std::map<int, std::vector<const RawRow*>> by_id;
  for (const auto& r : table.rows) {
    if (r.cls != AgentClass::kOther) by_id[r.track_id].push_back(&r);
  }

  Scene scene;
  scene.dt = 1.0 / target_hz;
  for (auto& [id, rows] : by_id) {
    std::sort(rows.begin(), rows.end(), [](const RawRow* a, const RawRow* b) { return a->frame < b->frame; });
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i]->cls != rows[0]->cls) {
        throw DataError(at_line(rows[i]->line) + "track " + std::to_string(id) + " changes class");
      }
    }
    std::vector<Segment> segments;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i == 0 || rows[i]->frame != rows[i - 1]->frame + 1) {
        segments.push_back({id, static_cast<int>(segments.size()), rows[i]->cls, {}});
      }
      segments.back().rows.push_back(rows[i]);
    }
    for (const auto& seg : segments) {
      const auto f0 = static_cast<double>(seg.rows.front()->frame);
      const auto f1 = static_cast<double>(seg.rows.back()->frame);
      const auto k_lo = static_cast<long>(std::ceil(f0 / ratio - 1e-9));
      const auto k_hi = static_cast<long>(std::floor(f1 / ratio + 1e-9));
      if (k_hi < k_lo) continue;
      std::vector<Vec2> pos;
      std::vector<std::optional<Vec2>> vel;
      for (long k = k_lo; k <= k_hi; ++k) {
        double u = static_cast<double>(k) * ratio;
        if (std::abs(u - std::round(u)) < 1e-9) u = std::round(u);
        u = std::clamp(u, f0, f1);
        auto [p, v] = interpolate(seg, u);
        pos.push_back(p);
        vel.push_back(v);
      }
      if (seg.cls == AgentClass::kPedestrian) {
        PedestrianTrack tr;
        tr.id = seg.id;
        tr.segment = seg.index;
        for (std::size_t j = 0; j < pos.size(); ++j) tr.obs.push_back({static_cast<int>(k_lo) + static_cast<int>(j), pos[j]});
        scene.pedestrians.push_back(std::move(tr));
      } else {
        VehicleTrack tr;
        tr.id = seg.id;
        tr.segment = seg.index;
        tr.t0 = static_cast<int>(k_lo);
        const bool have_vel = std::all_of(vel.begin(), vel.end(), [](const auto& v) { return v.has_value(); });
        const std::size_t m = pos.size();
        for (std::size_t j = 0; j < m; ++j) {
          Vec2 v = Vec2::Zero();
          if (have_vel) {
            v = *vel[j];
          } else if (m > 1) {
            const std::size_t a = j == 0 ? 0 : j - 1;
            const std::size_t b = j + 1 == m ? m - 1 : j + 1;
            v = (pos[b] - pos[a]) / (static_cast<double>(b - a) * scene.dt);
          }
          tr.states.push_back({pos[j], v});
        }
        scene.vehicles.push_back(std::move(tr));
      }
    }
  }
  return scene;
}

Scene load_scene(const std::string& path, const LoadOptions& options) {
  return resample(load_tracks(path, options), 10.0);
}

void write_tracks(std::ostream& out, const Scene& scene) {
  out << "track_id,class,frame,x_m,y_m,vx_mps,vy_mps\n";
  for (const auto& tr : scene.pedestrians) {
    for (const auto& o : tr.obs) {
      out << tr.id << ",pedestrian," << o.t << ',' << fmt(o.pos_hat.x()) << ',' << fmt(o.pos_hat.y()) << ",,\n";
    }
  }
  for (const auto& tr : scene.vehicles) {
    for (std::size_t j = 0; j < tr.states.size(); ++j) {
      const auto& s = tr.states[j];
      out << tr.id << ",vehicle," << tr.t0 + static_cast<int>(j) << ',' << fmt(s.pos.x()) << ',' << fmt(s.pos.y())
          << ',' << fmt(s.vel.x()) << ',' << fmt(s.vel.y()) << '\n';
    }
  }
}

void save_tracks(const std::string& path, const Scene& scene) {
  std::ostringstream out;
  write_tracks(out, scene);
  write_file(path, out.str());
}

void write_latent(std::ostream& out, const SyntheticData& data) {
  out << "track_id,frame,x_m,y_m,des_vx_mps,des_vy_mps,attended_id,q,tau_s,dmin_m\n";
  for (const auto& s : data.latent) {
    out << s.ped_id << ',' << s.t << ',' << fmt(s.state.pos.x()) << ',' << fmt(s.state.pos.y()) << ','
        << fmt(s.state.des_vel.x()) << ',' << fmt(s.state.des_vel.y()) << ',';
    if (s.attended_id) out << *s.attended_id;
    out << ',' << (s.decision.q == Yield::kYield ? "yield" : "continue") << ',';
    if (s.features) out << fmt(s.features->tau) << ',' << fmt(s.features->dmin);
    else out << ',';
    out << '\n';
  }
}

std::string model_to_json(const ModelFile& model) {
  Json j;
  j["format_version"] = kModelFormatVersion;
  j["params"] = params_json(model.params);
  j["provenance"] = {{"dataset", model.provenance.dataset},
                     {"seed", model.provenance.seed},
                     {"report_digest", model.provenance.report_digest}};
  return j.dump(2) + "\n";
}

ModelFile model_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw DataError(std::string("model file parse error: ") + e.what());
  }
  if (!j.is_object() || !j.contains("format_version")) throw VersionError("model file has no format_version");
  if (!j["format_version"].is_number_integer() || j["format_version"].get<int>() != kModelFormatVersion) {
    throw VersionError("unsupported model format_version " + j["format_version"].dump() + " (expected " +
                       std::to_string(kModelFormatVersion) + ")");
  }
  ModelFile m;
  try {
    m.params = params_from_json(j.at("params"));
    const Json& p = j.at("provenance");
    m.provenance.dataset = p.at("dataset").get<std::string>();
    m.provenance.seed = p.at("seed").get<std::uint64_t>();
    m.provenance.report_digest = p.at("report_digest").get<std::string>();
    m.params.validate();
  } catch (const Json::exception& e) {
    throw DataError(std::string("model file: ") + e.what());
  } catch (const ContractViolation& e) {
    throw DataError(std::string("model file holds invalid parameters: ") + e.what());
  }
  return m;
}

void save_model(const ModelFile& model, const std::string& path) { write_file(path, model_to_json(model)); }

ModelFile load_model(const std::string& path) { return model_from_json(read_file(path)); }

std::string fit_report_json(const FitReport& r) {
  Json j;
  j["final_loss"] = r.final_loss;
  j["loss_trace"] = r.loss_trace;
  j["block_trace"] = r.block_trace;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["best_restart"] = r.best_restart;
  j["excluded_pedestrians"] = r.excluded_pedestrians;
  j["short_pedestrians"] = r.short_pedestrians;
  j["records"] = r.records;
  j["yield_fraction"] = r.yield_fraction;
  j["sigma_v"] = r.sigma_v;
  j["sigma_v_iterations"] = r.sigma_v_iterations;
  j["sigma_v_converged"] = r.sigma_v_converged;
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

std::string report_digest(const FitReport& report) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : fit_report_json(report)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_metric_csv(std::ostream& out, const MetricTable& table) {
  out << "t_seconds,ade_m,rmse_m,n\n";
  for (const auto& r : table.rows) {
    out << fmt6(r.t_seconds) << ',' << fmt6(r.ade_m) << ',' << fmt6(r.rmse_m) << ',' << r.n << '\n';
  }
}

std::string metric_json(const MetricTable& table) {
  Json rows = Json::array();
  for (const auto& r : table.rows) {
    rows.push_back({{"t_seconds", r.t_seconds}, {"ade_m", r.ade_m}, {"rmse_m", r.rmse_m}, {"n", r.n}});
  }
  Json j;
  j["rows"] = rows;
  j["n_pedestrians"] = table.n_pedestrians;
  return j.dump(2) + "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << content;
    if (!out.flush()) throw DataError("write failed for " + path);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot write " + path + ": " + ec.message());
}

}  // namespace osp
