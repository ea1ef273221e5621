#pragma once

#include <string>
#include <vector>

#include "nlb/fieldio.hpp"

namespace nlb {

/// One output-time row of the coupled energy ledger. Dissipation and work
/// columns are cumulative from t = 0 and accumulate at dt resolution, so the
/// inequalities below stay tight regardless of the output cadence.
struct LedgerRow {
    double t = 0.0;
    double kinetic_energy = 0.0;
    double viscous_dissipation = 0.0;  // mu * integral of |grad v|^2, cumulative
    double buoyancy_work = 0.0;        // integral of Theta grad G . v, cumulative
    double heat_quadratic = 0.0;       // (1/2)(1/(1+lambda)) ||Theta + lambda avg - Theta_B||^2
    double thermal_dissipation = 0.0;  // kappa * integral of |grad(Theta - Theta_B)|^2, cumulative
    double boundary_work = 0.0;        // integral of Theta_B v . grad(Theta - Theta_B), cumulative
    double mean_theta = 0.0;
    double mean_theta_dq = 0.0;        // difference quotient against the previous output row
};

inline const char* ledger_header() {
    return "t,kinetic_energy,viscous_dissipation,buoyancy_work,heat_quadratic,"
           "thermal_dissipation,boundary_work,mean_theta,mean_theta_dq";
}

inline std::string csv_line(const std::vector<double>& vals) {
    std::string s;
    for (std::size_t k = 0; k < vals.size(); ++k) {
        if (k) s += ',';
        s += fmt_double(vals[k]);
    }
    return s;
}

inline std::string ledger_csv_line(const LedgerRow& r) {
    return csv_line({r.t, r.kinetic_energy, r.viscous_dissipation, r.buoyancy_work,
                     r.heat_quadratic, r.thermal_dissipation, r.boundary_work, r.mean_theta,
                     r.mean_theta_dq});
}

inline std::string ledger_to_csv(const std::vector<LedgerRow>& rows) {
    std::string s = ledger_header();
    s += '\n';
    for (const LedgerRow& r : rows) {
        s += ledger_csv_line(r);
        s += '\n';
    }
    return s;
}

inline std::vector<LedgerRow> ledger_from_csv(const std::string& text) {
    std::vector<LedgerRow> rows;
    std::size_t pos = text.find('\n');
    if (pos == std::string::npos || text.substr(0, pos) != ledger_header())
        throw ArtifactError("ledger CSV has an unexpected header");
    while (pos != std::string::npos && pos + 1 < text.size()) {
        std::size_t end = text.find('\n', pos + 1);
        std::string line = text.substr(pos + 1, end == std::string::npos ? std::string::npos
                                                                         : end - pos - 1);
        pos = end;
        if (line.empty()) continue;
        std::vector<double> v;
        const char* p = line.c_str();
        char* q = nullptr;
        for (;;) {
            double x = std::strtod(p, &q);
            if (q == p) break;
            v.push_back(x);
            p = (*q == ',') ? q + 1 : q;
            if (*q == '\0') break;
        }
        if (v.size() != 9) throw ArtifactError("ledger CSV row with " + std::to_string(v.size()) +
                                               " columns");
        rows.push_back({v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]});
    }
    return rows;
}

/// Mechanical balance defect at one row: KE(t) + dissipation + buoyancy work
/// - KE(0). The energy inequality asks this to be <= slack(dt).
inline double mechanical_defect(const LedgerRow& r, const LedgerRow& first) {
    return r.kinetic_energy + r.viscous_dissipation + r.buoyancy_work - first.kinetic_energy;
}

/// Thermal balance defect at one row: quadratic(t) + dissipation - boundary
/// work - (unweighted initial quadratic). The right-hand side of the thermal
/// inequality carries the plain L^2 norm of the initial lifted variable, which
/// the weighted first-row column recovers as (1+lambda) * heat_quadratic(0).
inline double thermal_defect(const LedgerRow& r, double rhs0) {
    return r.heat_quadratic + r.thermal_dissipation - r.boundary_work - rhs0;
}

struct LedgerAudit {
    double rhs0 = 0.0;                // unweighted initial thermal quadratic
    double mech_defect_max = 0.0;     // most positive mechanical defect over rows
    double thermal_defect_max = 0.0;  // most positive thermal defect over rows
    double mech_c = 0.0;              // smallest C with defect <= C * dt * t at every row
    double thermal_c = 0.0;
};

inline LedgerAudit audit_ledger(const std::vector<LedgerRow>& rows, double lambda, double dt) {
    if (rows.empty()) throw ArtifactError("audit_ledger: empty ledger");
    LedgerAudit a;
    a.rhs0 = (1.0 + lambda) * rows.front().heat_quadratic;
    a.mech_defect_max = -std::numeric_limits<double>::infinity();
    a.thermal_defect_max = -std::numeric_limits<double>::infinity();
    for (const LedgerRow& r : rows) {
        double md = mechanical_defect(r, rows.front());
        double td = thermal_defect(r, a.rhs0);
        a.mech_defect_max = std::max(a.mech_defect_max, md);
        a.thermal_defect_max = std::max(a.thermal_defect_max, td);
        if (r.t > 0.0) {
            a.mech_c = std::max(a.mech_c, md / (dt * r.t));
            a.thermal_c = std::max(a.thermal_c, td / (dt * r.t));
        }
    }
    return a;
}

}  // namespace nlb
