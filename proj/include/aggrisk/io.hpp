#pragma once

#include <aggrisk/risk.hpp>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace aggrisk {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// files

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    auto parent = std::filesystem::path(path).parent_path();
    std::error_code ec;
    if (!parent.empty()) std::filesystem::create_directories(parent, ec);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline json read_json(const std::string& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw IoError("'" + path + "': " + e.what());
    }
}

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

/// Splits one CSV line on commas; no quoting.
inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline bool parse_double(const std::string& s, double& v) {
    if (s.empty()) return false;
    try {
        std::size_t pos;
        v = std::stod(s, &pos);
        return pos == s.size() && std::isfinite(v);
    } catch (...) {
        return false;
    }
}

// ---------------------------------------------------------------------------
// distributions

inline json to_json(const Distribution& d) {
    return std::visit(detail::overloaded{
                          [](const Atoms& a) { return json{{"family", "atoms"}, {"x", a.x}, {"p", a.p}}; },
                          [](const Normal& n) { return json{{"family", "normal"}, {"mu", n.mu}, {"sigma", n.sigma}}; },
                          [](const StudentT& t) { return json{{"family", "student_t"}, {"nu", t.nu}, {"loc", t.loc}, {"scale", t.scale}}; },
                          [](const Logistic& l) { return json{{"family", "logistic"}, {"loc", l.loc}, {"scale", l.scale}}; },
                          [](const PointMass& p) { return json{{"family", "point_mass"}, {"t", p.t}}; },
                          [](const ParetoTail& p) { return json{{"family", "pareto"}, {"p", p.p}}; },
                          [](const MeanVarFsd& m) { return json{{"family", "meanvar_fsd"}, {"mu", m.mu}, {"sigma", m.sigma}}; },
                          [](const MeanVarSsd& m) { return json{{"family", "meanvar_ssd"}, {"mu", m.mu}, {"sigma", m.sigma}}; },
                          [](const QuantileGrid& g) { return json{{"family", "quantile_grid"}, {"levels", g.levels}, {"values", g.values}}; },
                          [](const ComonotoneSum& c) {
                              json t = json::array();
                              for (auto& w : c.terms) t.push_back({{"w", w.w}, {"dist", to_json(*w.d)}});
                              return json{{"family", "comonotone_sum"}, {"terms", t}};
                          },
                          [](const Mixture& m) {
                              json t = json::array();
                              for (auto& w : m.terms) t.push_back({{"w", w.w}, {"dist", to_json(*w.d)}});
                              return json{{"family", "mixture"}, {"terms", t}};
                          },
                      },
                      d.repr());
}

inline Distribution distribution_from_json(const json& j) {
    try {
        std::string f = j.at("family").get<std::string>();
        if (f == "atoms") return make_atoms(j.at("x").get<std::vector<double>>(), j.at("p").get<std::vector<double>>());
        if (f == "normal") return Normal{j.at("mu").get<double>(), j.at("sigma").get<double>()};
        if (f == "student_t" || f == "t") {
            if (j.contains("sd")) return StudentT::unit_variance(j.at("nu").get<double>(), j.value("loc", 0.0), j.at("sd").get<double>());
            return StudentT{j.at("nu").get<double>(), j.value("loc", 0.0), j.value("scale", 1.0)};
        }
        if (f == "logistic") return Logistic{j.at("loc").get<double>(), j.at("scale").get<double>()};
        if (f == "point_mass") return PointMass{j.at("t").get<double>()};
        if (f == "pareto") return ParetoTail{j.at("p").get<double>()};
        if (f == "meanvar_fsd") return MeanVarFsd{j.at("mu").get<double>(), j.at("sigma").get<double>()};
        if (f == "meanvar_ssd") return MeanVarSsd{j.at("mu").get<double>(), j.at("sigma").get<double>()};
        if (f == "quantile_grid") return QuantileGrid{j.at("levels").get<std::vector<double>>(), j.at("values").get<std::vector<double>>()};
        if (f == "comonotone_sum" || f == "mixture") {
            std::vector<Weighted> terms;
            for (auto& t : j.at("terms")) terms.push_back({t.at("w").get<double>(), share(distribution_from_json(t.at("dist")))});
            if (f == "mixture") return Mixture{std::move(terms)};
            return ComonotoneSum{std::move(terms)};
        }
        throw DomainError("unknown distribution family '" + f + "'");
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed distribution JSON: ") + e.what());
    }
}

/// Atoms as `location,probability` rows with a header.
inline std::string atoms_to_csv(const Atoms& a) {
    std::string s = "location,probability\n";
    for (std::size_t i = 0; i < a.size(); ++i) s += fmt(a.x[i]) + "," + fmt(a.p[i]) + "\n";
    return s;
}

inline Distribution atoms_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<double> xs, ps;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        auto c = split_csv(line);
        double x, p;
        if (c.size() != 2 || !parse_double(c[0], x) || !parse_double(c[1], p)) {
            if (row == 1) continue;  // header
            throw IoError("atoms CSV: bad row " + std::to_string(row));
        }
        xs.push_back(x);
        ps.push_back(p);
    }
    if (xs.empty()) throw IoError("atoms CSV: no rows");
    return make_atoms(std::move(xs), std::move(ps));
}

/// Loads a .csv atoms file or a .json distribution; a JSON array or
/// {"distributions": [...]} yields several.
inline DistributionList load_distributions(const std::string& path) {
    if (std::filesystem::path(path).extension() == ".csv") return {atoms_from_csv(read_text(path))};
    json j = read_json(path);
    DistributionList out;
    const json* arr = j.is_array() ? &j : (j.is_object() && j.contains("distributions") ? &j["distributions"] : nullptr);
    if (arr)
        for (auto& e : *arr) out.push_back(distribution_from_json(e));
    else
        out.push_back(distribution_from_json(j));
    return out;
}

// ---------------------------------------------------------------------------
// measures

inline Kusuoka kusuoka_from_json(const json& j) {
    try {
        Kusuoka k;
        for (auto& s : j.at("scenarios"))
            k.scenarios.push_back({s.at("weights").get<std::vector<double>>(), s.at("levels").get<std::vector<double>>()});
        return k;
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed Kusuoka JSON: ") + e.what());
    }
}

inline json to_json(const Kusuoka& k) {
    json s = json::array();
    for (auto& sc : k.scenarios) s.push_back({{"weights", sc.weights}, {"levels", sc.levels}});
    return json{{"scenarios", s}};
}

/// var:a, es:a, rvar:a:b, pd:k, expectile:a, kusuoka:@file.json
inline RiskMeasure parse_measure(const std::string& text) {
    auto parts = std::vector<std::string>{};
    {
        std::istringstream is(text);
        std::string p;
        while (std::getline(is, p, ':')) parts.push_back(p);
    }
    if (parts.empty()) throw DomainError("empty measure");
    const auto& kind = parts[0];
    if (kind == "kusuoka") {
        if (parts.size() != 2 || parts[1].empty() || parts[1][0] != '@') throw DomainError("expected kusuoka:@file.json");
        return kusuoka_from_json(read_json(parts[1].substr(1)));
    }
    std::vector<double> v;
    for (std::size_t i = 1; i < parts.size(); ++i) {
        double x;
        if (!parse_double(parts[i], x)) throw DomainError("bad number '" + parts[i] + "' in measure '" + text + "'");
        v.push_back(x);
    }
    auto need = [&](std::size_t n) {
        if (v.size() != n) throw DomainError("measure '" + text + "' expects " + std::to_string(n) + " parameter(s)");
    };
    if (kind == "var") return need(1), RiskMeasure(VaR{v[0]});
    if (kind == "es") return need(1), RiskMeasure(ES{v[0]});
    if (kind == "rvar") return need(2), RiskMeasure(RVaR{v[0], v[1]});
    if (kind == "pd") return need(1), RiskMeasure(PD{v[0]});
    if (kind == "expectile") return need(1), RiskMeasure(Expectile{v[0]});
    throw DomainError("unknown measure '" + kind + "'");
}

} // namespace aggrisk
