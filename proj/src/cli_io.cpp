#include "nested_is/cli_io.hpp"

#include <charconv>
#include <chrono>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <sstream>

namespace nis {

using nlohmann::json;

namespace {

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  throw Error(ErrorKind::ParseError, "field '" + field + "': " + what);
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed,
                    const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) field_error(where + key, "unknown key");
  }
}

double get_double(const json& obj, const char* key, const std::string& path, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) field_error(path + key, "expected a number");
  return v.get<double>();
}

std::int64_t get_int(const json& obj, const char* key, const std::string& path,
                     std::int64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) field_error(path + key, "expected an integer");
  return v.get<std::int64_t>();
}

std::string get_string(const json& obj, const char* key, const std::string& path,
                       std::string fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) field_error(path + key, "expected a string");
  return v.get<std::string>();
}

std::vector<Index> get_index_list(const json& obj, const char* key, std::vector<Index> fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_array() || v.empty()) field_error(key, "expected a non-empty array of integers");
  std::vector<Index> out;
  for (const auto& e : v) {
    if (!e.is_number_integer()) field_error(key, "expected a non-empty array of integers");
    out.push_back(e.get<Index>());
  }
  return out;
}

VectorXd get_vector(const json& obj, const char* key) {
  if (!obj.contains(key)) return {};
  const json& v = obj.at(key);
  if (!v.is_array()) field_error(key, "expected an array of numbers");
  VectorXd out(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) field_error(key, "expected an array of numbers");
    out(static_cast<Index>(i)) = v[i].get<double>();
  }
  return out;
}

json vector_json(const VectorXd& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::LinearGaussian: return "linear_gaussian";
    case ModelKind::BoundedObs: return "bounded_obs";
    case ModelKind::HeavyTail: return "heavy_tail";
    case ModelKind::Flat: return "flat";
  }
  return "linear_gaussian";
}

ModelConfig parse_model(const json& obj) {
  if (!obj.is_object()) field_error("model", "expected an object");
  reject_unknown(obj,
                 {"family", "kind", "spectra", "d_x", "d_y", "a", "b", "h", "q", "r", "sigma_x",
                  "mu_x", "convention", "bound", "dof"},
                 "model.");
  ModelConfig m;
  const std::string family = get_string(obj, "family", "model.", "S1");
  if (family != "S1") field_error("model.family", "only the preset \"S1\" is known");

  const std::string kind = get_string(obj, "kind", "model.", "linear_gaussian");
  bool kind_known = false;
  for (auto k : {ModelKind::LinearGaussian, ModelKind::BoundedObs, ModelKind::HeavyTail,
                 ModelKind::Flat}) {
    if (kind == model_kind_name(k)) {
      m.kind = k;
      kind_known = true;
    }
  }
  if (!kind_known) field_error("model.kind", "unknown model kind '" + kind + "'");

  const std::string spectra = get_string(obj, "spectra", "model.", "bounded");
  if (spectra == "bounded") {
    m.family.kind = SpectraKind::BoundedSpectra;
  } else if (spectra == "growing") {
    m.family.kind = SpectraKind::GrowingSpectra;
  } else {
    field_error("model.spectra", "expected \"bounded\" or \"growing\"");
  }
  m.family.d_x = get_int(obj, "d_x", "model.", m.family.d_x);
  m.family.d_y = get_int(obj, "d_y", "model.", m.family.d_y);
  m.family.a = get_double(obj, "a", "model.", m.family.a);
  m.family.b = get_double(obj, "b", "model.", m.family.b);
  m.family.h = get_double(obj, "h", "model.", m.family.h);
  m.family.q = get_double(obj, "q", "model.", m.family.q);
  m.family.r = get_double(obj, "r", "model.", m.family.r);
  m.family.sigma_x = get_double(obj, "sigma_x", "model.", m.family.sigma_x);
  m.family.mu_x = get_double(obj, "mu_x", "model.", m.family.mu_x);
  const std::string convention = get_string(obj, "convention", "model.", "sup_normalized");
  if (convention == "sup_normalized") {
    m.family.convention = LikelihoodConvention::SupNormalized;
  } else if (convention == "density") {
    m.family.convention = LikelihoodConvention::Density;
  } else {
    field_error("model.convention", "expected \"sup_normalized\" or \"density\"");
  }
  m.bound = get_double(obj, "bound", "model.", m.bound);
  m.dof = get_double(obj, "dof", "model.", m.dof);
  return m;
}

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorKind::ValidationError, what); }

void validate(const ExperimentConfig& c) {
  if (c.replications < 30) {
    invalid("replications = " + std::to_string(c.replications) + " is below the minimum of 30");
  }
  if (c.p != 1 && c.p != 2) invalid("p must be 1 or 2");
  for (const auto* list : {&c.n_list, &c.m_list, &c.d_z_list}) {
    for (Index v : *list) {
      if (v < 1) invalid("N, M and d_z entries must be >= 1");
    }
  }
  if (c.model.family.d_x < 1 || c.model.family.d_y < 1) invalid("d_x and d_y must be >= 1");
  if (!(c.radius > 0.0) || !std::isfinite(c.radius)) invalid("radius must be positive");
  if (c.chi_square_draws < 1 || c.link_y_draws < 2 || c.link_pool < 1) {
    invalid("chi_square_draws, link_y_draws and link_pool must be positive");
  }
  if (c.y.size() != 0 && c.y.size() != c.model.family.d_y) {
    invalid("y has length " + std::to_string(c.y.size()) + ", d_y is " +
            std::to_string(c.model.family.d_y));
  }
  if (c.y_mode == YMode::RandomFromModel && c.model.kind == ModelKind::Flat) {
    invalid("random observations need an observation law; the flat model has none");
  }
  try {
    make_test_function(c);
    for (Index d_z : c.d_z_list) ModelInstance instance(c.model, d_z);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ValidationError) throw;
    invalid(e.what());
  }
}

std::size_t line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

json digest_json(const SpectralDigest& d) {
  return {{"sigma1_A", d.sigma1_A},       {"sigma1_B", d.sigma1_B},
          {"sigma1_H", d.sigma1_H},       {"lambda1_sigma_x", d.lambda1_sigma_x},
          {"lambda1_Q", d.lambda1_Q},     {"lambda1_R", d.lambda1_R},
          {"lambda_min_R", d.lambda_min_R}, {"d_x", d.d_x},
          {"d_z", d.d_z},                 {"d_y", d.d_y},
          {"r", d.r},                     {"mu_y", vector_json(d.mu_y)}};
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace

// ---------------------------------------------------------------------------

ExperimentConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ParseError, "line " + std::to_string(line_of(text, e.byte)) + ": " +
                                           e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::ParseError, "config must be a JSON object");
  reject_unknown(doc,
                 {"schema_version", "model", "y_mode", "y", "N", "M", "d_z", "replications", "p",
                  "test_function", "direction", "seed", "radius", "chi_square_draws",
                  "link_y_draws", "link_pool", "threads"},
                 "");
  if (!doc.contains("schema_version")) field_error("schema_version", "missing");
  if (get_int(doc, "schema_version", "", 0) != kConfigSchemaVersion) {
    field_error("schema_version", "unsupported version, expected " +
                                      std::to_string(kConfigSchemaVersion));
  }

  ExperimentConfig c;
  if (doc.contains("model")) c.model = parse_model(doc.at("model"));
  const std::string mode = get_string(doc, "y_mode", "", "fixed");
  if (mode == "fixed") {
    c.y_mode = YMode::Fixed;
  } else if (mode == "random") {
    c.y_mode = YMode::RandomFromModel;
  } else {
    field_error("y_mode", "expected \"fixed\" or \"random\"");
  }
  c.y = get_vector(doc, "y");
  c.n_list = get_index_list(doc, "N", c.n_list);
  c.m_list = get_index_list(doc, "M", c.m_list);
  c.d_z_list = get_index_list(doc, "d_z", c.d_z_list);
  c.replications = get_int(doc, "replications", "", c.replications);
  c.p = static_cast<int>(get_int(doc, "p", "", c.p));
  c.test_function = get_string(doc, "test_function", "", c.test_function);
  c.direction = get_vector(doc, "direction");
  if (doc.contains("seed")) {
    const json& s = doc.at("seed");
    if (!s.is_number_unsigned()) field_error("seed", "expected a non-negative 64-bit integer");
    c.master_seed = s.get<std::uint64_t>();
  }
  c.radius = get_double(doc, "radius", "", c.radius);
  c.chi_square_draws = get_int(doc, "chi_square_draws", "", c.chi_square_draws);
  c.link_y_draws = get_int(doc, "link_y_draws", "", c.link_y_draws);
  c.link_pool = get_int(doc, "link_pool", "", c.link_pool);
  const std::int64_t threads = get_int(doc, "threads", "", 0);
  if (threads < 0) field_error("threads", "must be >= 0");
  c.threads = static_cast<unsigned>(threads);
  validate(c);
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  const FamilySpec& f = c.model.family;
  json model = {
      {"kind", model_kind_name(c.model.kind)},
      {"spectra", f.kind == SpectraKind::BoundedSpectra ? "bounded" : "growing"},
      {"d_x", f.d_x},
      {"d_y", f.d_y},
      {"a", f.a},
      {"b", f.b},
      {"h", f.h},
      {"q", f.q},
      {"r", f.r},
      {"sigma_x", f.sigma_x},
      {"mu_x", f.mu_x},
      {"convention", f.convention == LikelihoodConvention::SupNormalized ? "sup_normalized" : "density"},
      {"bound", c.model.bound},
      {"dof", c.model.dof}};
  json doc = {{"schema_version", kConfigSchemaVersion},
              {"model", model},
              {"y_mode", c.y_mode == YMode::Fixed ? "fixed" : "random"},
              {"N", c.n_list},
              {"M", c.m_list},
              {"d_z", c.d_z_list},
              {"replications", c.replications},
              {"p", c.p},
              {"test_function", c.test_function},
              {"seed", c.master_seed},
              {"radius", c.radius},
              {"chi_square_draws", c.chi_square_draws},
              {"link_y_draws", c.link_y_draws},
              {"link_pool", c.link_pool},
              {"threads", c.threads}};
  if (c.y.size() > 0) doc["y"] = vector_json(c.y);
  if (c.direction.size() > 0) doc["direction"] = vector_json(c.direction);
  return doc;
}

std::string serialize_config(const ExperimentConfig& config) {
  return config_to_json(config).dump(2) + "\n";
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return config_to_json(a) == config_to_json(b);
}

// ---------------------------------------------------------------------------

std::string format_double(double value) {
  if (std::isnan(value)) return "";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::string csv_table(const ErrorReport& report, std::uint64_t master_seed) {
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const CellResult& c : report.cells) {
    out << c.cell.n << ',' << c.cell.m << ',' << c.cell.d_z << ',' << c.p << ','
        << format_double(c.error) << ',' << format_double(c.std_error) << ','
        << format_double(c.ess_mean) << ',' << format_double(c.slope) << ','
        << format_double(c.slope_halfwidth) << ',' << master_seed << '\n';
  }
  return out.str();
}

json report_json(std::string_view subcommand, const ErrorReport& report) {
  json checks = json::array();
  for (const Check& c : report.checks) {
    checks.push_back({{"name", c.name},
                      {"passed", c.passed},
                      {"value", c.value},
                      {"threshold", c.threshold},
                      {"detail", c.detail}});
  }
  json cells = json::array();
  for (const CellResult& c : report.cells) {
    cells.push_back({{"N", c.cell.n},
                     {"M", c.cell.m},
                     {"d_z", c.cell.d_z},
                     {"p", c.p},
                     {"replications", c.replications},
                     {"error", c.error},
                     {"stderr", c.std_error},
                     {"ess_mean", c.ess_mean}});
  }
  json slopes = json::array();
  for (const SlopeFit& s : report.slopes) {
    slopes.push_back({{"slope", s.slope},
                      {"intercept", s.intercept},
                      {"halfwidth", s.halfwidth},
                      {"points", s.points}});
  }
  json certificates = json::array();
  for (const auto& group : report.certificates) {
    json items = json::array();
    for (const BoundCertificate& b : group) {
      items.push_back({{"name", b.name},
                       {"value", b.value},
                       {"hypotheses_hold", b.hypotheses_hold},
                       {"note", b.note},
                       {"digest", digest_json(b.digest)}});
    }
    certificates.push_back({{"d_z", group.empty() ? 0 : group.front().digest.d_z}, {"items", items}});
  }
  json poly = nullptr;
  if (report.poly_fit) {
    poly = {{"degree_estimate", report.poly_fit->degree_estimate},
            {"premise_m0", report.poly_fit->premise_m0},
            {"growth", report.poly_fit->growth}};
  }
  json chi = json::array();
  for (const ChiSquareReport& k : report.chi_square) {
    chi.push_back({{"d_y", k.d_y},
                   {"d_z", k.d_z},
                   {"draws", k.draws},
                   {"ks_statistic", k.ks_statistic},
                   {"p_value", k.p_value}});
  }
  return {{"schema_version", kConfigSchemaVersion},
          {"tool", "nested-is"},
          {"version", kToolVersion},
          {"subcommand", subcommand},
          {"passed", report.passed()},
          {"checks", checks},
          {"cells", cells},
          {"slopes", slopes},
          {"error_ratio", report.error_ratio ? json(*report.error_ratio) : json(nullptr)},
          {"certificates", certificates},
          {"poly_fit", poly},
          {"chi_square", chi}};
}

std::string plot_data(std::string_view subcommand, const ErrorReport& report) {
  std::ostringstream out;
  out << "# x y y_err\n";
  if (subcommand == "bounds") {
    for (const auto& group : report.certificates) {
      for (const BoundCertificate& b : group) {
        if (b.name == "inv_marginal") {
          out << b.digest.d_z << ' ' << format_double(b.value) << " 0\n";
        }
      }
    }
    return out.str();
  }
  const bool by_dz = subcommand == "sweep-dz";
  for (const CellResult& c : report.cells) {
    out << (by_dz ? c.cell.d_z : c.cell.n) << ' ' << format_double(c.error) << ' '
        << format_double(c.std_error) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------

std::optional<Subcommand> parse_subcommand(std::string_view name) {
  for (auto s : {Subcommand::SweepN, Subcommand::SweepDz, Subcommand::RandomObs, Subcommand::Bounds,
                 Subcommand::Validate, Subcommand::Equivalence}) {
    if (name == to_string(s)) return s;
  }
  return std::nullopt;
}

std::string to_string(Subcommand sub) {
  switch (sub) {
    case Subcommand::SweepN: return "sweep-n";
    case Subcommand::SweepDz: return "sweep-dz";
    case Subcommand::RandomObs: return "random-obs";
    case Subcommand::Bounds: return "bounds";
    case Subcommand::Validate: return "validate";
    case Subcommand::Equivalence: return "equivalence";
  }
  return "validate";
}

ErrorReport execute(Subcommand sub, const ExperimentConfig& config) {
  switch (sub) {
    case Subcommand::SweepN: return sweep_N(config);
    case Subcommand::SweepDz: return sweep_dz(config);
    case Subcommand::RandomObs: return random_obs_error(config);
    case Subcommand::Bounds: return bounds_report(config);
    case Subcommand::Equivalence: return equivalence_report(config);
    case Subcommand::Validate: {
      ErrorReport report;
      report.checks = validate_oracles(config);
      return report;
    }
  }
  throw Error(ErrorKind::InvalidSpec, "unknown subcommand");
}

int run(const RunOptions& options, std::ostream& out, std::ostream& err) {
  namespace fs = std::filesystem;
  if (options.config_path.empty() || !fs::is_regular_file(options.config_path)) {
    err << "nested-is: config file not found: '" << options.config_path.string() << "'\n";
    return 2;
  }
  try {
    std::ifstream in(options.config_path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();

    ExperimentConfig config;
    json doc = json::parse(text, nullptr, false);
    if (doc.is_object() && doc.contains("tool") && doc.contains("config")) {
      config = parse_config(doc.at("config").dump());
    } else {
      config = parse_config(text);
    }
    if (options.seed) config.master_seed = *options.seed;
    if (options.threads) config.threads = *options.threads;

    const auto start = std::chrono::steady_clock::now();
    const ErrorReport report = execute(options.subcommand, config);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const std::string name = to_string(options.subcommand);
    fs::create_directories(options.out_dir);
    const std::string csv_name = name + ".csv";
    const std::string report_name = name + "_report.json";
    const std::string plot_name = name + "_plot.dat";
    write_file(options.out_dir / csv_name, csv_table(report, config.master_seed));
    write_file(options.out_dir / report_name, report_json(name, report).dump(2) + "\n");
    write_file(options.out_dir / plot_name, plot_data(name, report));

    json cells = json::array();
    for (const CellResult& c : report.cells) {
      cells.push_back({{"N", c.cell.n}, {"M", c.cell.m}, {"d_z", c.cell.d_z}, {"seconds", c.seconds}});
    }
    const json manifest = {{"tool", "nested-is"},
                           {"version", kToolVersion},
                           {"subcommand", name},
                           {"master_seed", config.master_seed},
                           {"config", config_to_json(config)},
                           {"outputs", {{"csv", csv_name}, {"report", report_name}, {"plot", plot_name}}},
                           {"cells", cells},
                           {"total_seconds", seconds}};
    write_file(options.out_dir / "manifest.json", manifest.dump(2) + "\n");

    for (const Check& c : report.checks) {
      out << (c.passed ? "PASS " : "FAIL ") << c.name << " value=" << format_double(c.value)
          << " threshold=" << format_double(c.threshold) << '\n';
    }
    return report.passed() ? 0 : 1;
  } catch (const Error& e) {
    err << "nested-is: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "nested-is: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace nis
