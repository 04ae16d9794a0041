#pragma once

#include <string>
#include <vector>

namespace qcx {

/// One row of the invariant suite: what was checked, the measured extreme,
/// and the bound it was held against.
struct AuditRow {
    std::string name;
    bool pass = false;
    double measured = 0.0;
    double bound = 0.0;
};

inline bool all_pass(const std::vector<AuditRow>& rows) {
    for (const auto& r : rows)
        if (!r.pass) return false;
    return true;
}

}  // namespace qcx
