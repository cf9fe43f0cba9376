#pragma once

#include <aggrisk/io.hpp>
#include <aggrisk/robustopt.hpp>

namespace aggrisk {

namespace detail {

inline Eigen::VectorXd vec(const json& j) {
    auto v = j.get<std::vector<double>>();
    return Eigen::Map<Eigen::VectorXd>(v.data(), Eigen::Index(v.size()));
}

inline Eigen::MatrixXd mat(const json& j) {
    require(j.is_array() && !j.empty(), "matrix: expected a nonempty array of rows");
    const auto cols = j[0].size();
    Eigen::MatrixXd M(Eigen::Index(j.size()), Eigen::Index(cols));
    for (std::size_t r = 0; r < j.size(); ++r) {
        require(j[r].size() == cols, "matrix: ragged rows");
        for (std::size_t c = 0; c < cols; ++c) M(Eigen::Index(r), Eigen::Index(c)) = j[r][c].get<double>();
    }
    return M;
}

inline json to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline json to_json(const Eigen::MatrixXd& M) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) rows.push_back(to_json(Eigen::VectorXd(M.row(r).transpose())));
    return rows;
}

} // namespace detail

inline RiskMeasure measure_from_json(const json& j) {
    if (j.is_string()) return parse_measure(j.get<std::string>());
    return kusuoka_from_json(j);
}

/// Either {"newsvendor": {nw, d, n, W, N, seed}} or explicit
/// {"actions", "loss", "scenarios", "measure"} blocks.
inline RobustProgram program_from_json(const json& j) {
    try {
        if (j.contains("newsvendor")) {
            auto& g = j.at("newsvendor");
            NewsvendorParams P;
            P.nw = g.value("nw", P.nw);
            P.d = g.value("d", P.d);
            P.n = g.value("n", P.n);
            P.W = g.value("W", P.W);
            P.N = g.value("N", P.N);
            auto prog = make_newsvendor(P, g.value("seed", std::uint64_t(0)));
            if (j.contains("measure")) prog.measure = measure_from_json(j.at("measure"));
            return prog;
        }
        RobustProgram p;
        auto& a = j.at("actions");
        auto at = a.at("type").get<std::string>();
        if (at == "simplex") {
            SimplexActions s{a.at("d").get<Eigen::Index>(), std::nullopt};
            if (a.contains("target")) {
                auto& t = a.at("target");
                s.target = ReturnTarget{detail::vec(t.at("mu")), t.at("r0").get<double>(), t.value("m", 250.0)};
            }
            p.actions = s;
        } else if (at == "box") {
            p.actions = BoxActions{detail::vec(a.at("lo")), detail::vec(a.at("hi"))};
        } else {
            throw DomainError("unknown action set '" + at + "'");
        }
        auto& l = j.at("loss");
        auto lt = l.at("type").get<std::string>();
        if (lt == "linear")
            p.loss = LinearLoss{};
        else if (lt == "newsvendor")
            p.loss = NewsvendorLoss{detail::vec(l.at("beta")), detail::vec(l.at("eta"))};
        else
            throw DomainError("unknown loss '" + lt + "'");
        auto& s = j.at("scenarios");
        auto st = s.at("type").get<std::string>();
        if (st == "finite") {
            FiniteCdfs f;
            for (auto& c : s.at("clouds")) f.clouds.push_back(detail::mat(c));
            p.scenarios = f;
        } else if (st == "box") {
            p.scenarios = BoxProbability{detail::mat(s.at("points")), detail::vec(s.at("theta0")), detail::vec(s.at("lower")),
                                         detail::vec(s.at("upper"))};
        } else {
            throw DomainError("unknown scenario set '" + st + "'");
        }
        p.measure = measure_from_json(j.at("measure"));
        return p;
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed program JSON: ") + e.what());
    }
}

inline json to_json(const ProgramResult& r, Approach a) {
    return {{"approach", to_string(a)}, {"objective", r.objective}, {"action", detail::to_json(r.action)}, {"iterations", r.iterations},
            {"residual", r.residual},   {"converged", r.converged}};
}

/// sweep-var,value,approach,median_seconds,variables,constraints
inline std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::string s = "sweep_var,value,approach,median_seconds,variables,constraints,threshold_variables,objective,converged\n";
    for (auto& r : rows)
        s += r.sweep + "," + std::to_string(r.value) + "," + to_string(r.approach) + "," + fmt(r.median_seconds) + "," +
             std::to_string(r.size.variables) + "," + std::to_string(r.size.constraints) + "," + std::to_string(r.size.threshold_variables) + "," +
             fmt(r.objective) + "," + (r.converged ? "1" : "0") + "\n";
    return s;
}

} // namespace aggrisk
