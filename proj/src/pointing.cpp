#include "qgs/pointing.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace qgs {

namespace {

constexpr double kZenithGuardDeg = 89.5;
constexpr double kRankTolerance = 1e-9;

// Partial derivatives of (dx, dy) in urad with respect to each term in arcsec.
struct Basis {
    std::array<double, PointingCoefficients::kTerms> dx;
    std::array<double, PointingCoefficients::kTerms> dy;
};

Basis term_basis(double az_deg, double el_deg) {
    const double sa = std::sin(deg2rad(az_deg));
    const double ca = std::cos(deg2rad(az_deg));
    const double se = std::sin(deg2rad(el_deg));
    const double ce = std::cos(deg2rad(el_deg));
    const double k = kUradPerArcsec;
    //        IA       IE      CA      NPAE     AN            AW            TF
    return {{k * ce, 0.0, -k, -k * se, -k * sa * se, -k * ca * se, 0.0},
            {0.0, k, 0.0, 0.0, k * ca, -k * sa, k * ce}};
}

void check_elevation(double el_deg) {
    require_finite(el_deg, "el_deg");
    if (el_deg >= kZenithGuardDeg)
        throw ValidationError("el_deg", "model diverges near zenith; el must be < 89.5 deg");
}

}  // namespace

const std::array<const char*, PointingCoefficients::kTerms>& PointingCoefficients::names() {
    static const std::array<const char*, kTerms> n{"IA", "IE", "CA", "NPAE", "AN", "AW", "TF"};
    return n;
}

PointingCoefficients PointingCoefficients::from_array(const std::array<double, kTerms>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5], a[6]};
}

void PointingCoefficients::validate() const {
    const auto a = as_array();
    for (std::size_t i = 0; i < kTerms; ++i) {
        require_finite(a[i], names()[i]);
        require(std::abs(a[i]) < 3600.0, names()[i], "magnitude must be < 3600 arcsec");
    }
}

void StarObservation::validate() const {
    require_finite(az_deg, "az_deg");
    require_finite(el_deg, "el_deg");
    require_finite(dx_urad, "dx_urad");
    require_finite(dy_urad, "dy_urad");
    require(el_deg > -3.0 && el_deg < 93.0, "el_deg", "outside mount range (-3, 93)");
    require(az_deg > -270.0 && az_deg < 270.0, "az_deg", "outside mount range (-270, 270)");
}

MountCorrection apply_model(const PointingCoefficients& c, double az_deg, double el_deg) {
    check_elevation(el_deg);
    const auto b = term_basis(az_deg, el_deg);
    const auto a = c.as_array();
    double dx = 0.0;
    double dy = 0.0;
    for (std::size_t i = 0; i < PointingCoefficients::kTerms; ++i) {
        dx += b.dx[i] * a[i];
        dy += b.dy[i] * a[i];
    }
    return {dx / std::cos(deg2rad(el_deg)), dy};
}

StarObservation predict_observation(const PointingCoefficients& c, double az_deg, double el_deg) {
    const auto m = apply_model(c, az_deg, el_deg);
    return {az_deg, el_deg, m.daz_urad * std::cos(deg2rad(el_deg)), m.del_urad};
}

PointingFit fit_model(std::span<const StarObservation> obs) {
    constexpr auto kTerms = PointingCoefficients::kTerms;
    if (obs.size() < kTerms)
        throw ValidationError("observations", "need at least " + std::to_string(kTerms) +
                                                  " stars to fit " + std::to_string(kTerms) +
                                                  " terms, got " + std::to_string(obs.size()));
    const auto rows = static_cast<Eigen::Index>(2 * obs.size());
    Eigen::MatrixXd a(rows, static_cast<Eigen::Index>(kTerms));
    Eigen::VectorXd y(rows);
    for (std::size_t i = 0; i < obs.size(); ++i) {
        obs[i].validate();
        check_elevation(obs[i].el_deg);
        const auto b = term_basis(obs[i].az_deg, obs[i].el_deg);
        const auto r = static_cast<Eigen::Index>(2 * i);
        for (std::size_t j = 0; j < kTerms; ++j) {
            a(r, static_cast<Eigen::Index>(j)) = b.dx[j];
            a(r + 1, static_cast<Eigen::Index>(j)) = b.dy[j];
        }
        y(r) = obs[i].dx_urad;
        y(r + 1) = obs[i].dy_urad;
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const Eigen::Index last = sv.size() - 1;
    if (sv(last) <= kRankTolerance * sv(0)) {
        const Eigen::VectorXd null = svd.matrixV().col(last);
        const double peak = null.cwiseAbs().maxCoeff();
        std::ostringstream desc;
        bool first = true;
        for (std::size_t j = 0; j < kTerms; ++j) {
            const double w = null(static_cast<Eigen::Index>(j)) / peak;
            if (std::abs(w) < 0.05) continue;
            char buf[48];
            std::snprintf(buf, sizeof buf, "%s%.3g*%s", first ? "" : (w < 0 ? " - " : " + "),
                          first ? w : std::abs(w), PointingCoefficients::names()[j]);
            desc << buf;
            first = false;
        }
        throw DegenerateGeometryError(desc.str());
    }

    const Eigen::VectorXd x = svd.solve(y);
    std::array<double, kTerms> coef{};
    for (std::size_t j = 0; j < kTerms; ++j) coef[j] = x(static_cast<Eigen::Index>(j));
    PointingFit fit{PointingCoefficients::from_array(coef), 0.0};
    fit.rms_residual_urad = pointing_rms(fit.coefficients, obs);
    return fit;
}

double pointing_rms(const PointingCoefficients& c, std::span<const StarObservation> holdout) {
    require(!holdout.empty(), "holdout", "must not be empty");
    double sum = 0.0;
    for (const auto& o : holdout) {
        const auto p = predict_observation(c, o.az_deg, o.el_deg);
        const double rx = o.dx_urad - p.dx_urad;
        const double ry = o.dy_urad - p.dy_urad;
        sum += rx * rx + ry * ry;
    }
    return std::sqrt(sum / static_cast<double>(holdout.size()));
}

std::vector<StarObservation> synthetic_stars(const PointingCoefficients& truth, std::size_t count,
                                             double noise_urad, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> az(-180.0, 180.0);
    std::uniform_real_distribution<double> sin_el(std::sin(deg2rad(10.0)), std::sin(deg2rad(85.0)));
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<StarObservation> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double a = az(gen);
        const double e = rad2deg(std::asin(sin_el(gen)));
        auto o = predict_observation(truth, a, e);
        o.dx_urad += noise_urad * noise(gen);
        o.dy_urad += noise_urad * noise(gen);
        out.push_back(o);
    }
    return out;
}

void write_star_csv(std::ostream& os, std::span<const StarObservation> obs) {
    os << "az_deg,el_deg,dx_urad,dy_urad\n";
    char buf[128];
    for (const auto& o : obs) {
        std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%.10g\n", o.az_deg, o.el_deg, o.dx_urad, o.dy_urad);
        os << buf;
    }
}

std::vector<StarObservation> read_star_csv(std::istream& is) {
    std::string line;
    std::uint64_t lineno = 1;
    if (!std::getline(is, line) || line.rfind("az_deg,el_deg,dx_urad,dy_urad", 0) != 0)
        throw FormatError("star CSV: missing header 'az_deg,el_deg,dx_urad,dy_urad'", lineno);
    std::vector<StarObservation> out;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        StarObservation o{};
        char tail = 0;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf%c", &o.az_deg, &o.el_deg, &o.dx_urad, &o.dy_urad,
                        &tail) != 4)
            throw FormatError("star CSV: expected four numeric fields", lineno);
        out.push_back(o);
    }
    return out;
}

void write_coefficients(std::ostream& os, const PointingCoefficients& c) {
    const auto a = c.as_array();
    char buf[64];
    for (std::size_t i = 0; i < PointingCoefficients::kTerms; ++i) {
        std::snprintf(buf, sizeof buf, "%s=%.17g\n", PointingCoefficients::names()[i], a[i]);
        os << buf;
    }
}

PointingCoefficients read_coefficients(std::istream& is) {
    std::map<std::string, double> kv;
    std::string line;
    std::uint64_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("coefficient file: expected key=value", lineno);
        try {
            kv[line.substr(0, eq)] = std::stod(line.substr(eq + 1));
        } catch (const std::exception&) {
            throw FormatError("coefficient file: bad number", lineno);
        }
    }
    std::array<double, PointingCoefficients::kTerms> a{};
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto it = kv.find(PointingCoefficients::names()[i]);
        if (it == kv.end())
            throw FormatError(std::string("coefficient file: missing ") + PointingCoefficients::names()[i],
                              lineno);
        a[i] = it->second;
    }
    return PointingCoefficients::from_array(a);
}

}  // namespace qgs
