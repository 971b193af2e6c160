#pragma once

// CSV schemas for every artifact the toolkit writes:
//   tree:      node,value[,a,b,eps_even,eps_odd]
//   estimates: n,a_hat,c_hat,b_hat,d_hat,sa2,sc2,sb2,sd2,rab,rcd,regularized
//   limits:    matrix,row,col,value,mc_se
//   experiment bundle: scaled_errors.csv, summary.csv, rates.csv, qsl.csv,
//                      hist.csv
// Doubles are printed with 17 significant digits, so files round-trip to
// the exact bits and identical runs produce identical bytes.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcbar/estimate.hpp"
#include "rcbar/experiment.hpp"
#include "rcbar/simulate.hpp"

namespace rcbar {

inline std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string tree_to_csv(const TreeData& t) {
    std::string out;
    const bool draws = t.draws.has_value();
    out += draws ? "node,value,a,b,eps_even,eps_odd\n" : "node,value\n";
    const std::uint64_t parents = t.draws ? t.draws->a.size() : 0;
    for (std::size_t i = 0; i < t.x.size(); ++i) {
        out += std::to_string(i + 1);
        out += ',';
        out += fmt_double(t.x[i]);
        if (draws) {
            if (i < parents) {
                out += ',';
                out += fmt_double(t.draws->a[i]);
                out += ',';
                out += fmt_double(t.draws->b[i]);
                out += ',';
                out += fmt_double(t.draws->eps_even[i]);
                out += ',';
                out += fmt_double(t.draws->eps_odd[i]);
            } else {
                out += ",,,,";
            }
        }
        out += '\n';
    }
    return out;
}

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

inline double csv_double(std::string_view tok, std::size_t line_no) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
        throw std::runtime_error("tree csv: bad number on line " + std::to_string(line_no));
    return v;
}

}  // namespace detail

// Inverse of tree_to_csv.  The node count must be a full sub-tree,
// 2^{m+1}-1 nodes, labelled 1..count in order.
inline TreeData tree_from_csv(const std::string& content) {
    std::vector<double> values;
    std::optional<TreeDraws> draws;
    std::size_t pos = 0, line_no = 0;
    bool header = true;
    bool with_draws = false;
    while (pos < content.size()) {
        std::size_t eol = content.find('\n', pos);
        if (eol == std::string::npos) eol = content.size();
        std::string_view line(content.data() + pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = eol + 1;
        ++line_no;
        if (line.empty()) continue;
        if (header) {
            if (line == "node,value,a,b,eps_even,eps_odd") {
                with_draws = true;
                draws.emplace();
            } else if (line != "node,value") {
                throw std::runtime_error("tree csv: unrecognized header");
            }
            header = false;
            continue;
        }
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != (with_draws ? 6u : 2u))
            throw std::runtime_error("tree csv: wrong field count on line " + std::to_string(line_no));
        const double node = detail::csv_double(fields[0], line_no);
        if (node != static_cast<double>(values.size() + 1))
            throw std::runtime_error("tree csv: nodes must be labelled consecutively from 1");
        values.push_back(detail::csv_double(fields[1], line_no));
        if (with_draws && !fields[2].empty()) {
            draws->a.push_back(detail::csv_double(fields[2], line_no));
            draws->b.push_back(detail::csv_double(fields[3], line_no));
            draws->eps_even.push_back(detail::csv_double(fields[4], line_no));
            draws->eps_odd.push_back(detail::csv_double(fields[5], line_no));
        }
    }
    if (values.empty()) throw std::runtime_error("tree csv: no data rows");
    unsigned g = 0;
    while (subtree_size(g) < values.size() && g < kMaxGeneration) ++g;
    if (subtree_size(g) != values.size())
        throw std::runtime_error("tree csv: node count is not a full sub-tree (2^(n+1)-1)");
    TreeData t{TreeShape{g}, std::move(values), std::move(draws)};
    if (t.draws && t.draws->a.size() != (g == 0 ? 0 : subtree_size(g - 1)))
        throw std::runtime_error("tree csv: draw rows must cover exactly the non-leaf nodes");
    return t;
}

inline std::string estimates_to_csv(std::span<const EstimateSet> sets) {
    std::string out = "n,a_hat,c_hat,b_hat,d_hat,sa2,sc2,sb2,sd2,rab,rcd,regularized\n";
    for (const EstimateSet& e : sets) {
        out += std::to_string(e.n);
        for (int i = 0; i < 4; ++i) {
            out += ',';
            out += fmt_double(e.theta[i]);
        }
        for (int i = 0; i < 2; ++i) {
            out += ',';
            out += fmt_double(e.eta[i]);
        }
        for (int i = 0; i < 2; ++i) {
            out += ',';
            out += fmt_double(e.zeta[i]);
        }
        for (int i = 0; i < 2; ++i) {
            out += ',';
            out += fmt_double(e.nu[i]);
        }
        out += e.design.regularized ? ",true\n" : ",false\n";
    }
    return out;
}

inline std::string limits_to_csv(const LimitMatrices& lm) {
    std::string out = "matrix,row,col,value,mc_se\n";
    auto emit2 = [&](const char* name, const Mat2& v, const Mat2& se) {
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                out += std::string(name) + ',' + std::to_string(i) + ',' + std::to_string(j) + ',' +
                       fmt_double(v(i, j)) + ',' + fmt_double(se(i, j)) + '\n';
    };
    auto emit4 = [&](const char* name, const Mat4& v, const Mat4& se) {
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                out += std::string(name) + ',' + std::to_string(i) + ',' + std::to_string(j) + ',' +
                       fmt_double(v(i, j)) + ',' + fmt_double(se(i, j)) + '\n';
    };
    emit2("C", lm.c, lm.c_se);
    emit4("Lambda", lm.lambda, kron2(Mat2::identity(), lm.c_se));
    emit4("L", lm.l, lm.l_se);
    emit2("D", lm.d, lm.d_se);
    emit2("M_ac", lm.m_ac, lm.m_ac_se);
    emit2("M_bd", lm.m_bd, lm.m_bd_se);
    emit2("H", lm.h, lm.h_se);
    if (lm.cov_theta) emit4("cov_theta", *lm.cov_theta, lm.cov_theta_se);
    if (lm.cov_eta) emit2("cov_eta", *lm.cov_eta, lm.cov_eta_se);
    if (lm.cov_zeta) emit2("cov_zeta", *lm.cov_zeta, lm.cov_zeta_se);
    if (lm.cov_nu) emit2("cov_nu", *lm.cov_nu, lm.cov_nu_se);
    return out;
}

inline constexpr std::array<const char*, 10> kCoordNames = {
    "a", "c", "b", "d", "sa2", "sc2", "sb2", "sd2", "rab", "rcd"};
inline constexpr std::array<const char*, 4> kEstimatorNames = {"theta", "eta", "zeta", "nu"};

// The experiment bundle.  Histograms use 50 uniform bins spanning +-5
// target standard deviations when CLT targets were present (sample sd
// otherwise); outliers clamp into the edge bins.
inline void write_report_bundle(const ExperimentReport& rep, const std::string& outdir) {
    auto coord_values = [&](std::size_t coord) {
        std::vector<double> v(rep.replications);
        for (std::size_t r = 0; r < rep.replications; ++r) {
            if (coord < 4)
                v[r] = rep.theta_scaled[r][coord];
            else if (coord < 6)
                v[r] = rep.eta_scaled[r][coord - 4];
            else if (coord < 8)
                v[r] = rep.zeta_scaled[r][coord - 6];
            else
                v[r] = rep.nu_scaled[r][coord - 8];
        }
        return v;
    };

    {
        std::string out = "replication,coord,value\n";
        for (std::size_t r = 0; r < rep.replications; ++r)
            for (std::size_t c = 0; c < kCoordNames.size(); ++c) {
                const double v = c < 4   ? rep.theta_scaled[r][c]
                                 : c < 6 ? rep.eta_scaled[r][c - 4]
                                 : c < 8 ? rep.zeta_scaled[r][c - 6]
                                         : rep.nu_scaled[r][c - 8];
                out += std::to_string(r) + ',' + kCoordNames[c] + ',' + fmt_double(v) + '\n';
            }
        write_text_file(outdir + "/scaled_errors.csv", out);
    }
    {
        std::string out = "estimator,coord,mean,sd,skew,exkurt,ks\n";
        for (std::size_t c = 0; c < kCoordNames.size(); ++c) {
            const std::vector<double> v = coord_values(c);
            const MomentStats ms = moment_stats(v);
            const char* est = c < 4 ? "theta" : c < 6 ? "eta" : c < 8 ? "zeta" : "nu";
            const double ks = rep.normality.size() == kCoordNames.size() ? rep.normality[c].ks : -1.0;
            out += std::string(est) + ',' + kCoordNames[c] + ',' + fmt_double(ms.mean) + ',' +
                   fmt_double(ms.sd) + ',' + fmt_double(ms.skewness) + ',' +
                   fmt_double(ms.excess_kurtosis) + ',' + fmt_double(ks) + '\n';
        }
        write_text_file(outdir + "/summary.csv", out);
    }
    {
        std::string out = "n,statistic,median,q25,q75\n";
        for (unsigned n = 1; n <= rep.gens; ++n)
            for (std::size_t e = 0; e < kEstimatorNames.size(); ++e) {
                const RateQuartiles& q = rep.rate_series[e][n - 1];
                out += std::to_string(n) + ',' + kEstimatorNames[e] + ',' + fmt_double(q.median) +
                       ',' + fmt_double(q.q25) + ',' + fmt_double(q.q75) + '\n';
            }
        write_text_file(outdir + "/rates.csv", out);
    }
    {
        std::string out = "n,value,target_trace\n";
        for (unsigned n = 1; n <= rep.gens; ++n) {
            const double v = rep.has_qsl ? rep.qsl_series[n - 1] : -1.0;
            const double tgt = rep.has_qsl ? rep.qsl_target_trace : -1.0;
            out += std::to_string(n) + ',' + fmt_double(v) + ',' + fmt_double(tgt) + '\n';
        }
        write_text_file(outdir + "/qsl.csv", out);
    }
    {
        constexpr int kBins = 50;
        std::string out = "coord,bin_lo,bin_hi,count\n";
        for (std::size_t c = 0; c < kCoordNames.size(); ++c) {
            const std::vector<double> v = coord_values(c);
            double sd;
            if (rep.normality.size() == kCoordNames.size() && rep.normality[c].target_sd > 0.0) {
                sd = rep.normality[c].target_sd;
            } else {
                sd = moment_stats(v).sd;
                if (!(sd > 0.0)) sd = 1.0;
            }
            const double lo = -5.0 * sd;
            const double width = 10.0 * sd / kBins;
            std::array<std::uint64_t, kBins> counts{};
            for (double x : v) {
                int b = static_cast<int>(std::floor((x - lo) / width));
                b = std::max(0, std::min(kBins - 1, b));
                ++counts[static_cast<std::size_t>(b)];
            }
            for (int b = 0; b < kBins; ++b)
                out += std::string(kCoordNames[c]) + ',' + fmt_double(lo + b * width) + ',' +
                       fmt_double(lo + (b + 1) * width) + ',' + std::to_string(counts[b]) + '\n';
        }
        write_text_file(outdir + "/hist.csv", out);
    }
}

}  // namespace rcbar
