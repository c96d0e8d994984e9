#include <qflow/integrals.hpp>

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <regex>
#include <sstream>

namespace qflow {

namespace {

constexpr double kDuplicateTol = 1e-10;
constexpr double kSymmetryTol = 1e-10;

std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
    return s;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool header_int(const std::string& header, const std::string& key, int& out) {
    const std::regex re("(^|[^A-Z0-9_])" + key + R"(\s*=\s*([+-]?\d+))");
    std::smatch m;
    if (!std::regex_search(header, m, re)) return false;
    out = std::stoi(m[2].str());
    return true;
}

double parse_real(std::string tok, bool& ok) {
    for (char& c : tok) {
        if (c == 'D' || c == 'd') c = 'E';
    }
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    ok = end != tok.c_str() && *end == '\0';
    return v;
}

}  // namespace

IntegralStore IntegralStore::zeros(int n_orb, int n_elec, int ms2) {
    IntegralStore s;
    s.n_orb = n_orb;
    s.n_elec = n_elec;
    s.ms2 = ms2;
    s.h = Matrix::Zero(n_orb, n_orb);
    const auto n = static_cast<std::size_t>(n_orb);
    s.g.assign(n * n * n * n, 0.0);
    return s;
}

void IntegralStore::set_eri(int p, int q, int r, int s, double value) {
    for (auto [a, b, c, d] : {std::array{p, q, r, s}, std::array{q, p, r, s}, std::array{p, q, s, r},
                              std::array{q, p, s, r}, std::array{r, s, p, q}, std::array{s, r, p, q},
                              std::array{r, s, q, p}, std::array{s, r, q, p}}) {
        g[eri_index(a, b, c, d)] = value;
    }
}

bool IntegralStore::has_two_body() const {
    return std::any_of(g.begin(), g.end(), [](double v) { return v != 0.0; });
}

double IntegralStore::symmetry_defect() const {
    double worst = (h - h.transpose()).cwiseAbs().maxCoeff();
    for (int p = 0; p < n_orb; ++p)
        for (int q = 0; q < n_orb; ++q)
            for (int r = 0; r < n_orb; ++r)
                for (int s = 0; s < n_orb; ++s) {
                    const double v = eri(p, q, r, s);
                    for (double w : {eri(q, p, r, s), eri(p, q, s, r), eri(r, s, p, q)}) {
                        worst = std::max(worst, std::abs(v - w));
                    }
                }
    return worst;
}

double IntegralStore::max_difference(const IntegralStore& o) const {
    if (n_orb != o.n_orb || n_elec != o.n_elec || ms2 != o.ms2 || g.size() != o.g.size()) {
        return std::numeric_limits<double>::infinity();
    }
    double worst = std::abs(e_core - o.e_core);
    if (n_orb > 0) worst = std::max(worst, (h - o.h).cwiseAbs().maxCoeff());
    for (std::size_t i = 0; i < g.size(); ++i) worst = std::max(worst, std::abs(g[i] - o.g[i]));
    return worst;
}

IntegralParseError::IntegralParseError(Kind kind, int line, const std::string& what)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
      kind_(kind),
      line_(line) {}

IntegralStore parse_fcidump(std::istream& in) {
    using Kind = IntegralParseError::Kind;
    std::string line;
    std::string header;
    int line_no = 0;
    bool header_done = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string u = upper(trim(line));
        header += ' ' + u;
        if (u.find("&END") != std::string::npos || u == "/" || (!u.empty() && u.back() == '/')) {
            header_done = true;
            break;
        }
    }
    if (!header_done) throw IntegralParseError(Kind::Header, 0, "FCIDUMP header is not terminated");
    int norb = 0;
    int nelec = 0;
    int ms2 = 0;
    if (!header_int(header, "NORB", norb)) throw IntegralParseError(Kind::Header, 0, "missing NORB");
    if (!header_int(header, "NELEC", nelec)) throw IntegralParseError(Kind::Header, 0, "missing NELEC");
    header_int(header, "MS2", ms2);
    if (norb <= 0 || norb > kMaxSpatialOrbitals || nelec < 0 || nelec > 2 * norb ||
        std::abs(ms2) > nelec || (nelec + ms2) % 2 != 0) {
        throw IntegralParseError(Kind::Header, 0, "inconsistent NORB/NELEC/MS2");
    }

    IntegralStore store = IntegralStore::zeros(norb, nelec, ms2);
    std::vector<char> g_set(store.g.size(), 0);
    std::vector<char> h_set(static_cast<std::size_t>(norb * norb), 0);
    bool core_set = false;

    auto check = [&](bool already, double old, double v) {
        if (already && std::abs(old - v) > kDuplicateTol) {
            throw IntegralParseError(Kind::Consistency, line_no, "conflicting duplicate integral");
        }
    };

    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::vector<std::string> tok;
        for (std::string t; ls >> t;) tok.push_back(t);
        if (tok.empty()) continue;
        if (tok.size() != 5) throw IntegralParseError(Kind::Malformed, line_no, "expected 5 columns");
        bool ok = false;
        const double v = parse_real(tok[0], ok);
        if (!ok) throw IntegralParseError(Kind::Malformed, line_no, "bad value '" + tok[0] + "'");
        int idx[4];
        for (int c = 0; c < 4; ++c) {
            try {
                std::size_t used = 0;
                idx[c] = std::stoi(tok[c + 1], &used);
                if (used != tok[c + 1].size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw IntegralParseError(Kind::Malformed, line_no, "bad index '" + tok[c + 1] + "'");
            }
            if (idx[c] < 0 || idx[c] > norb) {
                throw IntegralParseError(Kind::Malformed, line_no, "orbital index out of range");
            }
        }
        const auto [i, j, k, l] = idx;
        if (i == 0 && j == 0 && k == 0 && l == 0) {
            check(core_set, store.e_core, v);
            store.e_core = v;
            core_set = true;
        } else if (k == 0 && l == 0) {
            if (i == 0 || j == 0) throw IntegralParseError(Kind::Malformed, line_no, "bad one-body record");
            const auto at = static_cast<std::size_t>((i - 1) * norb + (j - 1));
            check(h_set[at], store.h(i - 1, j - 1), v);
            store.set_h(i - 1, j - 1, v);
            h_set[at] = 1;
            h_set[static_cast<std::size_t>((j - 1) * norb + (i - 1))] = 1;
        } else {
            if (i == 0 || j == 0 || k == 0 || l == 0) {
                throw IntegralParseError(Kind::Malformed, line_no, "bad two-body record");
            }
            const auto at = store.eri_index(i - 1, j - 1, k - 1, l - 1);
            check(g_set[at], store.g[at], v);
            store.set_eri(i - 1, j - 1, k - 1, l - 1, v);
            for (auto [a, b, c, d] :
                 {std::array{i, j, k, l}, std::array{j, i, k, l}, std::array{i, j, l, k}, std::array{j, i, l, k},
                  std::array{k, l, i, j}, std::array{l, k, i, j}, std::array{k, l, j, i}, std::array{l, k, j, i}}) {
                g_set[store.eri_index(a - 1, b - 1, c - 1, d - 1)] = 1;
            }
        }
    }
    return store;
}

IntegralStore parse_fcidump(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse_fcidump(in);
}

IntegralStore read_fcidump(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return parse_fcidump(in);
}

std::string serialize_fcidump(const IntegralStore& s) {
    std::string out;
    char buf[96];
    std::snprintf(buf, sizeof buf, "&FCI NORB=%d,NELEC=%d,MS2=%d,\n ORBSYM=", s.n_orb, s.n_elec, s.ms2);
    out += buf;
    for (int p = 0; p < s.n_orb; ++p) out += "1,";
    out += "\n ISYM=1,\n&END\n";
    auto record = [&](double v, int i, int j, int k, int l) {
        std::snprintf(buf, sizeof buf, "%24.16E %4d %4d %4d %4d\n", v, i, j, k, l);
        out += buf;
    };
    const int n = s.n_orb;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l <= k; ++l) {
                    if (i * (i + 1) / 2 + j < k * (k + 1) / 2 + l) continue;
                    const double v = s.eri(i, j, k, l);
                    if (v != 0.0) record(v, i + 1, j + 1, k + 1, l + 1);
                }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) {
            const double v = s.h(i, j);
            if (i == j || v != 0.0) record(v, i + 1, j + 1, 0, 0);
        }
    record(s.e_core, 0, 0, 0, 0);
    return out;
}

IntegralStore parse_synthetic(std::string_view text) {
    using Kind = IntegralParseError::Kind;
    using nlohmann::json;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw IntegralParseError(Kind::Malformed, 0, e.what());
    }
    try {
        for (const char* key : {"n_orb", "n_elec", "h", "g"}) {
            if (!j.contains(key)) throw IntegralParseError(Kind::Header, 0, std::string("missing field ") + key);
        }
        const int n = j.at("n_orb").get<int>();
        const int ne = j.at("n_elec").get<int>();
        const int ms2 = j.value("ms2", 0);
        if (n <= 0 || n > kMaxSpatialOrbitals || ne < 0 || ne > 2 * n || (ne + ms2) % 2 != 0 ||
            std::abs(ms2) > ne) {
            throw IntegralParseError(Kind::Header, 0, "inconsistent n_orb/n_elec/ms2");
        }
        IntegralStore s = IntegralStore::zeros(n, ne, ms2);
        s.e_core = j.value("e_core", 0.0);
        const json& h = j.at("h");
        if (!h.is_array() || static_cast<int>(h.size()) != n) throw IntegralParseError(Kind::Shape, 0, "h shape");
        for (int p = 0; p < n; ++p) {
            if (!h[p].is_array() || static_cast<int>(h[p].size()) != n) {
                throw IntegralParseError(Kind::Shape, 0, "h shape");
            }
            for (int q = 0; q < n; ++q) s.h(p, q) = h[p][q].get<double>();
        }
        const json& g = j.at("g");
        auto dim_ok = [n](const json& a) { return a.is_array() && static_cast<int>(a.size()) == n; };
        if (!dim_ok(g)) throw IntegralParseError(Kind::Shape, 0, "g shape");
        for (int p = 0; p < n; ++p) {
            if (!dim_ok(g[p])) throw IntegralParseError(Kind::Shape, 0, "g shape");
            for (int q = 0; q < n; ++q) {
                if (!dim_ok(g[p][q])) throw IntegralParseError(Kind::Shape, 0, "g shape");
                for (int r = 0; r < n; ++r) {
                    if (!dim_ok(g[p][q][r])) throw IntegralParseError(Kind::Shape, 0, "g shape");
                    for (int t = 0; t < n; ++t) s.g[s.eri_index(p, q, r, t)] = g[p][q][r][t].get<double>();
                }
            }
        }
        if (s.symmetry_defect() > kSymmetryTol) {
            throw IntegralParseError(Kind::Consistency, 0, "h or g violates permutational symmetry");
        }
        return s;
    } catch (const json::exception& e) {
        throw IntegralParseError(Kind::Malformed, 0, e.what());
    }
}

std::string serialize_synthetic(const IntegralStore& s) {
    using nlohmann::json;
    json j;
    j["n_orb"] = s.n_orb;
    j["n_elec"] = s.n_elec;
    j["ms2"] = s.ms2;
    j["e_core"] = s.e_core;
    json h = json::array();
    for (int p = 0; p < s.n_orb; ++p) {
        json row = json::array();
        for (int q = 0; q < s.n_orb; ++q) row.push_back(s.h(p, q));
        h.push_back(row);
    }
    j["h"] = h;
    json g = json::array();
    for (int p = 0; p < s.n_orb; ++p) {
        json a = json::array();
        for (int q = 0; q < s.n_orb; ++q) {
            json b = json::array();
            for (int r = 0; r < s.n_orb; ++r) {
                json c = json::array();
                for (int t = 0; t < s.n_orb; ++t) c.push_back(s.eri(p, q, r, t));
                b.push_back(c);
            }
            a.push_back(b);
        }
        g.push_back(a);
    }
    j["g"] = g;
    return j.dump(1) + "\n";
}

}  // namespace qflow
