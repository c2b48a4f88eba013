// SPDX-License-Identifier: Apache-2.0
#pragma once

// Conic Benchmark Format (CBF, version 3) dump and load.
// Blocks map to L+, Q and QR cone entries of the CON section; free variables only.

#include "program.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace risbf::conic {

namespace detail {

inline std::string fmt17(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline const char* cbf_cone_tag(ConeKind k)
{
    switch (k)
    {
    case ConeKind::NonNegative: return "L+";
    case ConeKind::SecondOrder: return "Q";
    case ConeKind::RotatedSecondOrder: return "QR";
    }
    return "?";
}

} // namespace detail

inline void write_cbf(const ConicProgram& p, std::ostream& os)
{
    os << "# risbf conic program\n";
    os << "VER\n3\n\n";
    os << "OBJSENSE\nMAX\n\n";
    os << "VAR\n" << p.num_vars() << " 1\nF " << p.num_vars() << "\n\n";

    int rows = 0;
    for (const auto& b : p.blocks()) rows += b.dim;
    os << "CON\n" << rows << ' ' << p.blocks().size() << '\n';
    for (const auto& b : p.blocks()) os << detail::cbf_cone_tag(b.kind) << ' ' << b.dim << '\n';
    os << '\n';

    const LinExpr& obj = p.objective_expr();
    if (!obj.terms().empty())
    {
        os << "OBJACOORD\n" << obj.terms().size() << '\n';
        for (const auto& [i, v] : obj.terms()) os << i << ' ' << detail::fmt17(v) << '\n';
        os << '\n';
    }
    if (obj.constant() != 0.0) os << "OBJBCOORD\n" << detail::fmt17(obj.constant()) << "\n\n";

    size_t nnz = 0, bnz = 0;
    for (const auto& b : p.blocks())
    {
        nnz += b.coeffs.size();
        for (Eigen::Index r = 0; r < b.offset.size(); ++r) bnz += b.offset[r] != 0.0;
    }
    if (nnz)
    {
        os << "ACOORD\n" << nnz << '\n';
        int base = 0;
        for (const auto& b : p.blocks())
        {
            for (const auto& t : b.coeffs) os << base + t.row() << ' ' << t.col() << ' ' << detail::fmt17(t.value()) << '\n';
            base += b.dim;
        }
        os << '\n';
    }
    if (bnz)
    {
        os << "BCOORD\n" << bnz << '\n';
        int base = 0;
        for (const auto& b : p.blocks())
        {
            for (Eigen::Index r = 0; r < b.offset.size(); ++r)
                if (b.offset[r] != 0.0) os << base + r << ' ' << detail::fmt17(b.offset[r]) << '\n';
            base += b.dim;
        }
        os << '\n';
    }
}

inline ConicProgram read_cbf(std::istream& is)
{
    auto next_line = [&](std::string& line) {
        while (std::getline(is, line))
        {
            const auto p = line.find_first_not_of(" \t\r");
            if (p == std::string::npos || line[p] == '#') continue;
            line = line.substr(p);
            while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
            return true;
        }
        return false;
    };
    auto fail = [](const std::string& why) { throw std::runtime_error("read_cbf: " + why); };

    std::string line;
    int nvar = -1;
    double sense = 1.0;
    std::vector<std::pair<ConeKind, int>> cones;
    std::vector<std::pair<int, double>> obj;
    double obj_const = 0.0;
    std::vector<std::tuple<int, int, double>> acoord;
    std::vector<std::pair<int, double>> bcoord;

    while (next_line(line))
    {
        std::istringstream ss;
        if (line == "VER")
        {
            next_line(line);
            if (std::stoi(line) > 3) fail("unsupported version " + line);
        }
        else if (line == "OBJSENSE")
        {
            next_line(line);
            if (line == "MAX")
                sense = 1.0;
            else if (line == "MIN")
                sense = -1.0;
            else
                fail("bad OBJSENSE " + line);
        }
        else if (line == "VAR")
        {
            next_line(line);
            int groups = 0;
            std::istringstream(line) >> nvar >> groups;
            for (int g = 0; g < groups; ++g)
            {
                next_line(line);
                std::string tag;
                int dim = 0;
                std::istringstream(line) >> tag >> dim;
                if (tag != "F") fail("only free variables are supported");
            }
        }
        else if (line == "CON")
        {
            next_line(line);
            int rows = 0, groups = 0;
            std::istringstream(line) >> rows >> groups;
            for (int g = 0; g < groups; ++g)
            {
                next_line(line);
                std::string tag;
                int dim = 0;
                std::istringstream(line) >> tag >> dim;
                ConeKind k;
                if (tag == "L+")
                    k = ConeKind::NonNegative;
                else if (tag == "Q")
                    k = ConeKind::SecondOrder;
                else if (tag == "QR")
                    k = ConeKind::RotatedSecondOrder;
                else
                    fail("unsupported cone " + tag);
                cones.emplace_back(k, dim);
            }
        }
        else if (line == "OBJACOORD")
        {
            next_line(line);
            const int cnt = std::stoi(line);
            for (int i = 0; i < cnt; ++i)
            {
                next_line(line);
                int j;
                double v;
                std::istringstream(line) >> j >> v;
                obj.emplace_back(j, v);
            }
        }
        else if (line == "OBJBCOORD")
        {
            next_line(line);
            obj_const = std::stod(line);
        }
        else if (line == "ACOORD")
        {
            next_line(line);
            const int cnt = std::stoi(line);
            for (int i = 0; i < cnt; ++i)
            {
                next_line(line);
                int r, j;
                double v;
                std::istringstream(line) >> r >> j >> v;
                acoord.emplace_back(r, j, v);
            }
        }
        else if (line == "BCOORD")
        {
            next_line(line);
            const int cnt = std::stoi(line);
            for (int i = 0; i < cnt; ++i)
            {
                next_line(line);
                int r;
                double v;
                std::istringstream(line) >> r >> v;
                bcoord.emplace_back(r, v);
            }
        }
        else
            fail("unsupported section " + line);
    }
    if (nvar < 0) fail("missing VAR section");

    ConicProgram p;
    for (int i = 0; i < nvar; ++i) p.add_variable();
    LinExpr o(sense * obj_const);
    for (const auto& [j, v] : obj) o.add_term(j, sense * v);
    p.set_objective(o);

    std::vector<int> start;
    int total = 0;
    for (const auto& c : cones) start.push_back(total), total += c.second;
    std::vector<int> owner(total);
    for (size_t b = 0; b < cones.size(); ++b)
        for (int r = 0; r < cones[b].second; ++r) owner[start[b] + r] = static_cast<int>(b);

    std::vector<ConeBlock> blocks(cones.size());
    for (size_t b = 0; b < cones.size(); ++b)
    {
        blocks[b].kind = cones[b].first;
        blocks[b].dim = cones[b].second;
        blocks[b].offset = Eigen::VectorXd::Zero(cones[b].second);
    }
    for (const auto& [r, j, v] : acoord)
    {
        if (r < 0 || r >= total) fail("ACOORD row out of range");
        const int b = owner[r];
        blocks[b].coeffs.emplace_back(r - start[b], j, v);
    }
    for (const auto& [r, v] : bcoord)
    {
        if (r < 0 || r >= total) fail("BCOORD row out of range");
        const int b = owner[r];
        blocks[b].offset[r - start[b]] = v;
    }
    for (auto& b : blocks) p.add_block(std::move(b));
    return p;
}

inline void write_cbf_file(const ConicProgram& p, const std::string& path)
{
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_cbf(p, f);
    if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

inline ConicProgram read_cbf_file(const std::string& path)
{
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    return read_cbf(f);
}

} // namespace risbf::conic
