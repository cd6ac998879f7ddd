#include "fpanel/model_io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>

#include <nlohmann/json.hpp>

#include "fpanel/errors.hpp"
#include "fpanel/version.hpp"

namespace fpanel {

using nlohmann::json;

namespace {

std::string fmt_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

Eigen::VectorXd vector_from_json(const json& arr) {
    Eigen::VectorXd v(arr.size());
    Eigen::Index i = 0;
    for (const auto& x : arr) v[i++] = x.get<double>();
    return v;
}

std::string classifier_name(ClassifyMethod m) {
    return m == ClassifyMethod::threshold ? "threshold" : "gmm";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw validation_error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw validation_error("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw validation_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void check_schema(const json& doc) {
    if (!doc.contains("schema_version") || !doc["schema_version"].is_string())
        throw validation_error("document lacks a schema_version");
    const std::string got = doc["schema_version"].get<std::string>();
    const std::string ours = schema_version;
    const auto major = [](const std::string& s) { return s.substr(0, s.find('.')); };
    if (major(got) != major(ours))
        throw validation_error("unsupported schema version " + got + " (expected major " +
                               major(ours) + ")");
}

}  // namespace

ModelDocument build_model_document(const Grid& grid, const StepOneFit& step1,
                                   const RegimePartition& partition, const RegimeFit& refit,
                                   const ModelDocument::ConfigEcho& echo) {
    ModelDocument doc;
    doc.grid_points = grid.points;
    for (const auto& f : step1.fits) {
        ModelDocument::PeriodRecord rec;
        rec.t = f.t + 1;
        rec.m = f.m;
        rec.beta = f.beta_hat;
        rec.sigma_eps = f.sigma_eps;
        rec.alpha = f.alpha_hat;
        rec.alpha_delta = f.alpha_delta;
        doc.periods.push_back(std::move(rec));
    }
    doc.partition.method = classifier_name(partition.method);
    doc.partition.tau = partition.tau;
    doc.partition.k_max = partition.k_max;
    for (const auto& g : partition.regimes) {
        std::vector<int> members;
        members.reserve(g.size());
        for (int t : g) members.push_back(t + 1);
        doc.partition.regimes.push_back(std::move(members));
    }
    int k = 1;
    for (const auto& r : refit.regimes) {
        ModelDocument::RegimeRecord rec;
        rec.k = k++;
        for (int t : r.members) rec.members.push_back(t + 1);
        rec.m = r.m;
        rec.A = r.A_tilde;
        doc.regimes.push_back(std::move(rec));
    }
    doc.config = echo;
    return doc;
}

std::string model_to_json(const ModelDocument& doc) {
    json j;
    j["schema_version"] = schema_version;
    j["library_version"] = library_version;
    j["grid"] = vector_to_json(doc.grid_points);

    json periods = json::array();
    for (const auto& p : doc.periods) {
        json rec;
        rec["t"] = p.t;
        rec["m"] = p.m;
        rec["beta"] = vector_to_json(p.beta);
        rec["sigma_eps"] = p.sigma_eps;
        rec["alpha"] = vector_to_json(p.alpha);
        rec["alpha_delta"] = vector_to_json(p.alpha_delta);
        periods.push_back(std::move(rec));
    }
    j["periods"] = std::move(periods);

    json part;
    part["method"] = doc.partition.method;
    part["tau"] = doc.partition.tau;
    part["k_max"] = doc.partition.k_max;
    part["regimes"] = doc.partition.regimes;
    j["partition"] = std::move(part);

    json regimes = json::array();
    for (const auto& r : doc.regimes) {
        json rec;
        rec["k"] = r.k;
        rec["members"] = r.members;
        rec["m"] = r.m;
        rec["A"] = vector_to_json(r.A);
        regimes.push_back(std::move(rec));
    }
    j["regimes"] = std::move(regimes);

    json cfg;
    cfg["p_tau"] = doc.config.p_tau;
    cfg["m_override"] = doc.config.m_override ? json(*doc.config.m_override) : json(nullptr);
    cfg["k_max_override"] =
        doc.config.k_max_override ? json(*doc.config.k_max_override) : json(nullptr);
    cfg["seed"] = doc.config.seed;
    cfg["classifier"] = doc.config.classifier;
    j["config"] = std::move(cfg);

    return j.dump(2) + "\n";
}

ModelDocument model_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& ex) {
        throw validation_error(std::string("invalid model JSON: ") + ex.what());
    }
    check_schema(j);
    try {
        ModelDocument doc;
        doc.grid_points = vector_from_json(j.at("grid"));
        for (const auto& rec : j.at("periods")) {
            ModelDocument::PeriodRecord p;
            p.t = rec.at("t").get<int>();
            p.m = rec.at("m").get<int>();
            p.beta = vector_from_json(rec.at("beta"));
            p.sigma_eps = rec.at("sigma_eps").get<double>();
            p.alpha = vector_from_json(rec.at("alpha"));
            p.alpha_delta = vector_from_json(rec.at("alpha_delta"));
            doc.periods.push_back(std::move(p));
        }
        const auto& part = j.at("partition");
        doc.partition.method = part.at("method").get<std::string>();
        doc.partition.tau = part.at("tau").get<double>();
        doc.partition.k_max = part.at("k_max").get<int>();
        doc.partition.regimes = part.at("regimes").get<std::vector<std::vector<int>>>();
        for (const auto& rec : j.at("regimes")) {
            ModelDocument::RegimeRecord r;
            r.k = rec.at("k").get<int>();
            r.members = rec.at("members").get<std::vector<int>>();
            r.m = rec.at("m").get<int>();
            r.A = vector_from_json(rec.at("A"));
            doc.regimes.push_back(std::move(r));
        }
        const auto& cfg = j.at("config");
        doc.config.p_tau = cfg.at("p_tau").get<double>();
        if (!cfg.at("m_override").is_null())
            doc.config.m_override = cfg.at("m_override").get<int>();
        if (!cfg.at("k_max_override").is_null())
            doc.config.k_max_override = cfg.at("k_max_override").get<int>();
        doc.config.seed = cfg.at("seed").get<std::uint64_t>();
        doc.config.classifier = cfg.at("classifier").get<std::string>();
        return doc;
    } catch (const json::exception& ex) {
        throw validation_error(std::string("malformed model document: ") + ex.what());
    }
}

void save_model(const ModelDocument& doc, const std::filesystem::path& path) {
    write_text(path, model_to_json(doc));
}

ModelDocument load_model(const std::filesystem::path& path) {
    return model_from_json(read_text(path));
}

std::string report_to_json(const SimReport& report) {
    json j;
    j["schema_version"] = schema_version;
    j["library_version"] = library_version;

    json cfg;
    cfg["scenario"] = report.config.scenario;
    cfg["n"] = report.config.n;
    cfg["T"] = report.config.T;
    cfg["reps"] = report.config.reps;
    cfg["seed"] = report.config.seed;
    cfg["p_tau"] = report.config.p_tau;
    cfg["classifier"] = classifier_name(report.config.classifier);
    cfg["L"] = report.config.L;
    cfg["m_override"] =
        report.config.m_override ? json(*report.config.m_override) : json(nullptr);
    cfg["grid_eval_count"] = report.config.grid_eval_count;
    cfg["k_range_max"] = report.config.k_range_max;
    cfg["kmeans_restarts"] = report.config.kmeans.restarts;
    cfg["gmm_restarts"] = report.config.gmm.restarts;
    j["config"] = std::move(cfg);

    json records = json::array();
    for (const auto& r : report.records) {
        json rec;
        rec["rep"] = r.rep;
        if (r.failed) {
            rec["failed"] = true;
            rec["error"] = r.error;
        } else {
            rec["beta_mse"] = r.beta_mse;
            rec["class_error_threshold"] = r.class_error_threshold;
            if (r.class_error_gmm) rec["class_error_gmm"] = *r.class_error_gmm;
            rec["rel_error"] = json::array({r.rel_error[0], r.rel_error[1], r.rel_error[2]});
            rec["k_hat"] = r.k_hat;
            rec["k_max"] = r.k_max;
        }
        records.push_back(std::move(rec));
    }
    j["records"] = std::move(records);

    json summary;
    for (const auto& [name, s] : report.summary) {
        json m;
        m["q25"] = s.q25;
        m["median"] = s.median;
        m["mean"] = s.mean;
        m["q75"] = s.q75;
        m["sd"] = s.sd;
        summary[name] = std::move(m);
    }
    j["summary"] = std::move(summary);
    j["failures"] = report.failures;

    return j.dump(2) + "\n";
}

void save_report(const SimReport& report, const std::filesystem::path& path) {
    write_text(path, report_to_json(report));
}

namespace {

struct CsvReader {
    std::ifstream in;
    std::string path;
    int line_no = 0;

    explicit CsvReader(const std::filesystem::path& p) : in(p), path(p.string()) {
        if (!in) throw validation_error("cannot open " + path);
    }

    bool next(std::vector<std::string>& fields) {
        std::string line;
        for (;;) {
            if (!std::getline(in, line)) return false;
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) break;
        }
        fields.clear();
        std::size_t start = 0;
        for (;;) {
            const std::size_t comma = line.find(',', start);
            if (comma == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, comma - start));
            start = comma + 1;
        }
        return true;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw validation_error(path + ":" + std::to_string(line_no) + ": " + msg);
    }

    double parse_double(const std::string& s) const {
        double v;
        const char* begin = s.data();
        const char* end = begin + s.size();
        const auto res = std::from_chars(begin, end, v);
        if (res.ec != std::errc{} || res.ptr != end) fail("non-numeric field '" + s + "'");
        return v;
    }

    int parse_index(const std::string& s) const {
        int v;
        const char* begin = s.data();
        const char* end = begin + s.size();
        const auto res = std::from_chars(begin, end, v);
        if (res.ec != std::errc{} || res.ptr != end || v < 1)
            fail("bad index field '" + s + "' (expected integer >= 1)");
        return v;
    }
};

}  // namespace

std::pair<Grid, std::vector<Eigen::MatrixXd>> load_curves_csv(const std::filesystem::path& path) {
    CsvReader reader(path);
    std::vector<std::string> fields;
    if (!reader.next(fields)) reader.fail("empty file");
    if (fields != std::vector<std::string>{"i", "t", "s", "x"})
        reader.fail("expected header 'i,t,s,x'");

    std::map<std::pair<int, int>, std::vector<std::pair<double, double>>> cells;
    int max_i = 0, max_t = 0;
    while (reader.next(fields)) {
        if (fields.size() != 4) reader.fail("expected 4 fields");
        const int i = reader.parse_index(fields[0]);
        const int t = reader.parse_index(fields[1]);
        const double s = reader.parse_double(fields[2]);
        const double x = reader.parse_double(fields[3]);
        cells[{i, t}].emplace_back(s, x);
        max_i = std::max(max_i, i);
        max_t = std::max(max_t, t);
    }
    if (cells.empty()) throw validation_error(path.string() + ": no data rows");

    // reference grid from the first cell
    auto ref_it = cells.find({1, 1});
    if (ref_it == cells.end())
        throw validation_error(path.string() + ": missing cell (i=1,t=1)");
    auto sort_cell = [&](std::vector<std::pair<double, double>>& cell, int i, int t) {
        std::sort(cell.begin(), cell.end());
        for (std::size_t l = 1; l < cell.size(); ++l)
            if (cell[l].first == cell[l - 1].first)
                throw validation_error(path.string() + ": duplicate grid point s=" +
                                       fmt_double(cell[l].first) + " at (i=" + std::to_string(i) +
                                       ",t=" + std::to_string(t) + ")");
    };
    sort_cell(ref_it->second, 1, 1);
    const std::size_t L = ref_it->second.size();
    Eigen::VectorXd points(static_cast<Eigen::Index>(L));
    for (std::size_t l = 0; l < L; ++l) points[static_cast<Eigen::Index>(l)] = ref_it->second[l].first;
    Grid grid = make_grid(points);

    std::vector<Eigen::MatrixXd> x(static_cast<std::size_t>(max_t));
    for (auto& slice : x) slice.resize(max_i, static_cast<Eigen::Index>(L));

    for (int t = 1; t <= max_t; ++t) {
        for (int i = 1; i <= max_i; ++i) {
            auto it = cells.find({i, t});
            if (it == cells.end())
                throw validation_error(path.string() + ": missing cell (i=" + std::to_string(i) +
                                       ",t=" + std::to_string(t) + ")");
            auto& cell = it->second;
            sort_cell(cell, i, t);
            if (cell.size() != L)
                throw validation_error(path.string() + ": ragged grid at (i=" + std::to_string(i) +
                                       ",t=" + std::to_string(t) + "): " +
                                       std::to_string(cell.size()) + " points, expected " +
                                       std::to_string(L));
            for (std::size_t l = 0; l < L; ++l) {
                if (cell[l].first != points[static_cast<Eigen::Index>(l)])
                    throw validation_error(path.string() + ": grid mismatch at (i=" +
                                           std::to_string(i) + ",t=" + std::to_string(t) +
                                           "): s=" + fmt_double(cell[l].first) + " vs s=" +
                                           fmt_double(points[static_cast<Eigen::Index>(l)]));
                x[static_cast<std::size_t>(t - 1)](i - 1, static_cast<Eigen::Index>(l)) =
                    cell[l].second;
            }
        }
    }
    return {std::move(grid), std::move(x)};
}

ScalarData load_scalars_csv(const std::filesystem::path& path) {
    CsvReader reader(path);
    std::vector<std::string> fields;
    if (!reader.next(fields)) reader.fail("empty file");
    if (fields.size() < 3 || fields[0] != "i" || fields[1] != "t" || fields[2] != "y")
        reader.fail("expected header 'i,t,y[,z1..zP]'");
    const int P = static_cast<int>(fields.size()) - 3;
    for (int p = 0; p < P; ++p)
        if (fields[static_cast<std::size_t>(3 + p)] != "z" + std::to_string(p + 1))
            reader.fail("expected covariate column 'z" + std::to_string(p + 1) + "'");

    struct Row {
        double y;
        std::vector<double> z;
    };
    std::map<std::pair<int, int>, Row> cells;
    int max_i = 0, max_t = 0;
    while (reader.next(fields)) {
        if (fields.size() != static_cast<std::size_t>(3 + P))
            reader.fail("expected " + std::to_string(3 + P) + " fields");
        const int i = reader.parse_index(fields[0]);
        const int t = reader.parse_index(fields[1]);
        Row row;
        row.y = reader.parse_double(fields[2]);
        for (int p = 0; p < P; ++p)
            row.z.push_back(reader.parse_double(fields[static_cast<std::size_t>(3 + p)]));
        if (!cells.emplace(std::make_pair(i, t), std::move(row)).second)
            reader.fail("duplicate cell (i=" + std::to_string(i) + ",t=" + std::to_string(t) + ")");
        max_i = std::max(max_i, i);
        max_t = std::max(max_t, t);
    }
    if (cells.empty()) throw validation_error(path.string() + ": no data rows");

    ScalarData out;
    out.y.resize(max_i, max_t);
    out.z.assign(static_cast<std::size_t>(max_t), Eigen::MatrixXd(max_i, P));
    for (int t = 1; t <= max_t; ++t) {
        for (int i = 1; i <= max_i; ++i) {
            auto it = cells.find({i, t});
            if (it == cells.end())
                throw validation_error(path.string() + ": missing cell (i=" + std::to_string(i) +
                                       ",t=" + std::to_string(t) + ")");
            out.y(i - 1, t - 1) = it->second.y;
            for (int p = 0; p < P; ++p)
                out.z[static_cast<std::size_t>(t - 1)](i - 1, p) = it->second.z[static_cast<std::size_t>(p)];
        }
    }
    return out;
}

Panel load_panel(const std::filesystem::path& curves, const std::filesystem::path& scalars) {
    auto [grid, x] = load_curves_csv(curves);
    ScalarData sc = load_scalars_csv(scalars);
    const Eigen::Index n = x.empty() ? 0 : x.front().rows();
    const Eigen::Index T = static_cast<Eigen::Index>(x.size());
    if (sc.y.rows() != n || sc.y.cols() != T)
        throw validation_error("curve and scalar files disagree: curves give n=" +
                               std::to_string(n) + ", T=" + std::to_string(T) +
                               "; scalars give n=" + std::to_string(sc.y.rows()) + ", T=" +
                               std::to_string(sc.y.cols()));
    Panel panel;
    panel.grid = std::move(grid);
    panel.x = std::move(x);
    panel.y = std::move(sc.y);
    panel.z = std::move(sc.z);
    validate_panel(panel);
    return panel;
}

void dump_panel_csv(const Panel& panel, const std::filesystem::path& curves,
                    const std::filesystem::path& scalars) {
    {
        std::ofstream out(curves, std::ios::binary);
        if (!out) throw validation_error("cannot open " + curves.string() + " for writing");
        out << "i,t,s,x\n";
        for (Eigen::Index t = 0; t < panel.T(); ++t) {
            const auto& slice = panel.x[static_cast<std::size_t>(t)];
            for (Eigen::Index i = 0; i < panel.n(); ++i)
                for (Eigen::Index l = 0; l < panel.L(); ++l)
                    out << (i + 1) << ',' << (t + 1) << ',' << fmt_double(panel.grid.points[l])
                        << ',' << fmt_double(slice(i, l)) << '\n';
        }
    }
    {
        std::ofstream out(scalars, std::ios::binary);
        if (!out) throw validation_error("cannot open " + scalars.string() + " for writing");
        out << "i,t,y";
        for (Eigen::Index p = 0; p < panel.P(); ++p) out << ",z" << (p + 1);
        out << '\n';
        for (Eigen::Index t = 0; t < panel.T(); ++t) {
            const auto& zt = panel.z[static_cast<std::size_t>(t)];
            for (Eigen::Index i = 0; i < panel.n(); ++i) {
                out << (i + 1) << ',' << (t + 1) << ',' << fmt_double(panel.y(i, t));
                for (Eigen::Index p = 0; p < panel.P(); ++p) out << ',' << fmt_double(zt(i, p));
                out << '\n';
            }
        }
    }
}

void write_plot_data(const std::filesystem::path& dir, const Grid& grid,
                     const StepOneFit& step1, const RegimeFit& refit) {
    std::filesystem::create_directories(dir);
    auto write_curve = [&](const std::filesystem::path& path, const Eigen::VectorXd& curve) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw validation_error("cannot open " + path.string() + " for writing");
        out << "u,value\n";
        for (Eigen::Index l = 0; l < grid.size(); ++l)
            out << fmt_double(grid.points[l]) << ',' << fmt_double(curve[l]) << '\n';
    };
    for (const auto& f : step1.fits)
        write_curve(dir / ("alpha_delta_t" + std::to_string(f.t + 1) + ".csv"), f.alpha_delta);
    int k = 1;
    for (const auto& r : refit.regimes)
        write_curve(dir / ("regime_A" + std::to_string(k++) + ".csv"), r.A_tilde);
}

}  // namespace fpanel
