#pragma once

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "iscc/channel.hpp"
#include "iscc/model.hpp"
#include "iscc/solver/problem.hpp"

namespace iscc {

using json = nlohmann::json;

inline json vec_to_json(const Vec& v)
{
    json j = json::array();
    for (int i = 0; i < v.size(); ++i) j.push_back(v(i));
    return j;
}

inline Vec vec_from_json(const json& j, const std::string& what)
{
    if (!j.is_array()) throw ConfigError(what + ": expected an array of numbers");
    Vec v(static_cast<int>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError(what + ": expected an array of numbers");
        v(static_cast<int>(i)) = j[i].get<double>();
    }
    return v;
}

inline json mat_to_json(const Mat& A)
{
    json j = json::array();
    for (int r = 0; r < A.rows(); ++r) j.push_back(vec_to_json(A.row(r).transpose()));
    return j;
}

inline Mat mat_from_json(const json& j, const std::string& what)
{
    if (!j.is_array() || j.empty()) throw ConfigError(what + ": expected a nonempty array of rows");
    const int rows = static_cast<int>(j.size());
    Vec first = vec_from_json(j[0], what);
    Mat A(rows, first.size());
    for (int r = 0; r < rows; ++r) {
        Vec row = vec_from_json(j[r], what);
        if (row.size() != A.cols()) throw ConfigError(what + ": ragged rows");
        A.row(r) = row.transpose();
    }
    return A;
}

inline json cmat_to_json(const CMat& A)
{
    return {{"re", mat_to_json(A.real())}, {"im", mat_to_json(A.imag())}};
}

inline CMat cmat_from_json(const json& j, const std::string& what)
{
    if (!j.contains("re") || !j.contains("im")) throw ConfigError(what + ": expected {re, im}");
    Mat re = mat_from_json(j.at("re"), what + ".re");
    Mat im = mat_from_json(j.at("im"), what + ".im");
    if (re.rows() != im.rows() || re.cols() != im.cols()) throw ConfigError(what + ": re/im shapes differ");
    CMat A(re.rows(), re.cols());
    A.real() = re;
    A.imag() = im;
    return A;
}

inline json to_json(const MixtureModel& m) { return {{"mu", mat_to_json(m.mu)}, {"sigma2", vec_to_json(m.sigma2)}}; }

inline MixtureModel model_from_json(const json& j)
{
    return MixtureModel::make(mat_from_json(j.at("mu"), "model.mu"), vec_from_json(j.at("sigma2"), "model.sigma2"));
}

inline json to_json(const SensingProfile& p)
{
    return {{"sigma_s2", vec_to_json(p.sigma_s2)}, {"mu_s", vec_to_json(p.mu_s)}, {"sigma_r2", p.sigma_r2},
            {"T_s", vec_to_json(p.T_s)}};
}

inline SensingProfile profile_from_json(const json& j)
{
    SensingProfile p{vec_from_json(j.at("sigma_s2"), "profile.sigma_s2"), vec_from_json(j.at("mu_s"), "profile.mu_s"),
                     j.at("sigma_r2").get<double>(), vec_from_json(j.at("T_s"), "profile.T_s")};
    p.validate();
    return p;
}

inline json to_json(const ChannelState& ch)
{
    json h = json::array();
    for (const auto& hk : ch.h) h.push_back(cmat_to_json(hk));
    return {{"N0", ch.N0}, {"h", h}};
}

inline ChannelState channel_from_json(const json& j)
{
    ChannelState ch;
    ch.N0 = j.at("N0").get<double>();
    for (std::size_t k = 0; k < j.at("h").size(); ++k)
        ch.h.push_back(cmat_from_json(j.at("h")[k], "channel.h[" + std::to_string(k) + "]"));
    ch.validate();
    return ch;
}

inline json to_json(const EnergyBudget& b)
{
    return {{"E", vec_to_json(b.E)}, {"E_p", vec_to_json(b.E_p)}, {"T_s", vec_to_json(b.T_s)}, {"T_c", b.T_c}};
}

inline EnergyBudget budget_from_json(const json& j)
{
    EnergyBudget b{vec_from_json(j.at("E"), "budget.E"), vec_from_json(j.at("E_p"), "budget.E_p"),
                   vec_from_json(j.at("T_s"), "budget.T_s"), j.at("T_c").get<double>()};
    b.validate();
    return b;
}

inline json to_json(const DesignVariables& x)
{
    return {{"P_s", vec_to_json(x.P_s)}, {"c", mat_to_json(x.c)}, {"f", cmat_to_json(x.f)},
            {"u", mat_to_json(x.u)},     {"v", mat_to_json(x.v)}, {"alpha", x.alpha}};
}

inline DesignVariables design_from_json(const json& j)
{
    DesignVariables x;
    x.P_s = vec_from_json(j.at("P_s"), "design.P_s");
    x.c = mat_from_json(j.at("c"), "design.c");
    x.f = cmat_from_json(j.at("f"), "design.f");
    x.u = mat_from_json(j.at("u"), "design.u");
    x.v = mat_from_json(j.at("v"), "design.v");
    x.alpha = j.at("alpha").get<double>();
    return x;
}

/*! Everything needed to replay a solve: model, sensing profile, channel, budget. */
struct Instance {
    MixtureModel model;
    SensingProfile profile;
    ChannelState channel;
    EnergyBudget budget;

    Problem problem() const { return Problem::assemble(model, profile, channel, budget); }
};

inline json to_json(const Instance& in)
{
    return {{"model", to_json(in.model)}, {"sensing_profile", to_json(in.profile)}, {"channel", to_json(in.channel)},
            {"budget", to_json(in.budget)}};
}

inline Instance instance_from_json(const json& j)
{
    return {model_from_json(j.at("model")), profile_from_json(j.at("sensing_profile")),
            channel_from_json(j.at("channel")), budget_from_json(j.at("budget"))};
}

inline json read_json_file(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open " + path);
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << text;
    if (!os) throw std::runtime_error("write failed for " + path);
}

} // namespace iscc
