#include "sae/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "sae/errors.hpp"

namespace sae {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <typename T>
T parse_cell(const std::string& text, std::size_t row, const std::string& column) {
    T value{};
    const char* begin = text.data();
    const char* end = begin + text.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (text.empty() || ec != std::errc() || ptr != end) {
        throw DataError("row " + std::to_string(row) + ", column '" + column +
                        "': cannot parse '" + text + "'");
    }
    return value;
}

nlohmann::ordered_json vector_json(const VectorXd& v) {
    auto arr = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

}  // namespace

std::string format_real(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

// -------------------------------------------------------------------------
// Datasets
// -------------------------------------------------------------------------

AreaDataset read_dataset_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("row 1: missing header");
    std::vector<std::string> header = split_csv_line(line);
    for (auto& h : header) h = trim(h);

    if (header.size() < 4 || header[0] != "area_id" || header[1] != "y" || header[2] != "D") {
        throw DataError("row 1: header must be area_id,y,D,x1,...,xp");
    }
    const std::size_t p = header.size() - 3;
    for (std::size_t j = 0; j < p; ++j) {
        const std::string expected = "x" + std::to_string(j + 1);
        if (header[3 + j] != expected) {
            throw DataError("row 1, column " + std::to_string(4 + j) + ": expected '" + expected +
                            "', found '" + header[3 + j] + "'");
        }
    }

    std::vector<AreaObservation> areas;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DataError("row " + std::to_string(row) + ": expected " +
                            std::to_string(header.size()) + " columns, found " +
                            std::to_string(cells.size()));
        }
        for (auto& c : cells) c = trim(c);

        AreaObservation a;
        a.area_id = parse_cell<int>(cells[0], row, "area_id");
        a.y = parse_cell<double>(cells[1], row, "y");
        a.D = parse_cell<double>(cells[2], row, "D");
        a.x = VectorXd(p);
        for (std::size_t j = 0; j < p; ++j) a.x(j) = parse_cell<double>(cells[3 + j], row, header[3 + j]);

        if (!std::isfinite(a.y)) throw DataError("row " + std::to_string(row) + ", column 'y': not finite");
        if (!(a.D > 0.0) || !std::isfinite(a.D)) {
            throw DataError("row " + std::to_string(row) + ", column 'D': must be finite and > 0");
        }
        for (std::size_t j = 0; j < p; ++j) {
            if (!std::isfinite(a.x(j))) {
                throw DataError("row " + std::to_string(row) + ", column '" + header[3 + j] + "': not finite");
            }
        }
        areas.push_back(std::move(a));
    }
    return AreaDataset(std::move(areas));
}

AreaDataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset file '" + path + "'");
    return read_dataset_csv(in);
}

void write_dataset_csv(std::ostream& out, const AreaDataset& data) {
    out << "area_id,y,D";
    for (std::size_t j = 0; j < data.p(); ++j) out << ",x" << j + 1;
    out << '\n';
    for (const auto& a : data.areas()) {
        out << a.area_id << ',' << format_real(a.y) << ',' << format_real(a.D);
        for (Eigen::Index j = 0; j < a.x.size(); ++j) out << ',' << format_real(a.x(j));
        out << '\n';
    }
}

nlohmann::ordered_json to_json(const ParamVector& delta) {
    nlohmann::ordered_json j;
    j["beta"] = vector_json(delta.beta);
    j["sigma_u2"] = delta.sigma_u2;
    return j;
}

nlohmann::ordered_json to_json(const FitResult& fit) {
    nlohmann::ordered_json j;
    j["delta_hat"] = to_json(fit.delta_hat);
    j["sigma_truncated"] = fit.sigma_truncated;
    auto cov = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < fit.gls_cov_beta.rows(); ++r) {
        cov.push_back(vector_json(fit.gls_cov_beta.row(r).transpose()));
    }
    j["gls_cov_beta"] = std::move(cov);
    return j;
}

void write_breakdown_csv(std::ostream& out, std::span<const MspeBreakdown> breakdowns) {
    out << "area_id,method,value,m1,m2,bias_correction,used_tilt,tilt_component\n";
    for (const auto& b : breakdowns) {
        for (const auto& a : b.areas) {
            const bool used = a.tilt && a.tilt->used_preliminary;
            const std::size_t component = a.tilt ? a.tilt->component + 1 : 0;
            out << a.area_id << ',' << to_string(b.method) << ',' << format_real(a.value) << ','
                << format_real(a.m1_part) << ',' << format_real(a.m2_part) << ','
                << format_real(a.bias_correction) << ',' << (used ? 1 : 0) << ',' << component
                << '\n';
        }
    }
}

// -------------------------------------------------------------------------
// Simulation config and outputs
// -------------------------------------------------------------------------

SimulationConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw DataError("config must be a JSON object");
    SimulationConfig cfg;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "beta0") cfg.beta0 = value.get<double>();
            else if (key == "beta1") cfg.beta1 = value.get<double>();
            else if (key == "sigma_u2") cfg.sigma_u2 = value.get<double>();
            else if (key == "sigma_e2") cfg.sigma_e2 = value.get<double>();
            else if (key == "n_list") cfg.n_list = value.get<std::vector<int>>();
            else if (key == "x_list") cfg.x_list = value.get<std::vector<double>>();
            else if (key == "R") cfg.R = value.get<std::size_t>();
            else if (key == "B") cfg.B = value.get<std::size_t>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else if (key == "design_replication") cfg.design_replication = value.get<std::size_t>();
            else if (key == "tilt_diag_weight") cfg.tilt_diag_weight = parse_diag_weight(value.get<std::string>());
            else if (key == "methods") {
                cfg.methods.clear();
                for (const auto& name : value) cfg.methods.push_back(parse_method(name.get<std::string>()));
            } else {
                throw DataError("unknown config key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

SimulationConfig read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("config '" + path + "': " + e.what());
    }
    return config_from_json(j);
}

nlohmann::ordered_json to_json(const SimulationConfig& cfg) {
    nlohmann::ordered_json j;
    j["beta0"] = cfg.beta0;
    j["beta1"] = cfg.beta1;
    j["sigma_u2"] = cfg.sigma_u2;
    j["sigma_e2"] = cfg.sigma_e2;
    j["n_list"] = cfg.n_list;
    j["x_list"] = cfg.x_list;
    j["R"] = cfg.R;
    j["B"] = cfg.B;
    j["seed"] = cfg.seed;
    auto methods = nlohmann::ordered_json::array();
    for (auto m : cfg.methods) methods.push_back(std::string(to_string(m)));
    j["methods"] = std::move(methods);
    j["design_replication"] = cfg.design_replication;
    j["tilt_diag_weight"] = std::string(to_string(cfg.tilt_diag_weight));
    return j;
}

nlohmann::ordered_json to_json(const SixNumberSummary& s) {
    nlohmann::ordered_json j;
    j["min"] = s.min;
    j["q1"] = s.q1;
    j["median"] = s.median;
    j["mean"] = s.mean;
    j["q3"] = s.q3;
    j["max"] = s.max;
    return j;
}

nlohmann::ordered_json to_json(const SimulationSummary& summary) {
    nlohmann::ordered_json j;
    j["config"] = to_json(summary.config);
    j["m"] = summary.smspe.size();
    j["sigma_truncations"] = summary.sigma_truncations;
    j["smspe"] = vector_json(summary.smspe);
    auto methods = nlohmann::ordered_json::object();
    for (const auto& s : summary.methods) {
        nlohmann::ordered_json mj;
        mj["rb_summary"] = to_json(s.rb_summary);
        mj["cv_summary"] = to_json(s.cv_summary);
        mj["negative_count"] = s.negative_count;
        mj["min_estimate"] = s.min_estimate;
        if (s.tilt_fallback_rate) mj["tilt_fallback_rate"] = *s.tilt_fallback_rate;
        if (s.tilt_fallback_se) mj["tilt_fallback_se"] = *s.tilt_fallback_se;
        mj["mean_estimate"] = vector_json(s.mean_estimate);
        mj["rb"] = vector_json(s.rb);
        mj["cv"] = vector_json(s.cv);
        methods[s.name] = std::move(mj);
    }
    j["methods"] = std::move(methods);
    return j;
}

void write_per_area_csv(std::ostream& out, const SimulationSummary& summary) {
    out << "area_id,method,smspe,rb,cv\n";
    for (const auto& s : summary.methods) {
        for (Eigen::Index i = 0; i < summary.smspe.size(); ++i) {
            out << i + 1 << ',' << s.name << ',' << format_real(summary.smspe(i)) << ','
                << format_real(s.rb(i)) << ',' << format_real(s.cv(i)) << '\n';
        }
    }
}

void write_raw_csv(std::ostream& out, const SimulationSummary& summary) {
    if (!summary.raw) throw std::logic_error("simulation summary holds no raw records");
    const RawRecords& raw = *summary.raw;
    out << "replicate,area_id,theta,theta_hat";
    for (const auto& name : raw.method_names) out << ',' << name;
    out << '\n';
    for (Eigen::Index r = 0; r < raw.theta_true.rows(); ++r) {
        for (Eigen::Index i = 0; i < raw.theta_true.cols(); ++i) {
            out << r + 1 << ',' << i + 1 << ',' << format_real(raw.theta_true(r, i)) << ','
                << format_real(raw.theta_hat(r, i));
            for (const auto& e : raw.estimates) out << ',' << format_real(e(r, i));
            out << '\n';
        }
    }
}

}  // namespace sae
