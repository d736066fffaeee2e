#include <deque>
#include <sstream>

#include "modeguard/pointsto.hpp"

namespace modeguard {

std::string AbstractLocation::to_string() const {
    switch (kind) {
    case Kind::Var: return scope + "::%" + name;
    case Kind::Global: return "%" + name;
    case Kind::Field: return "%" + scope + "." + name;
    case Kind::FuncObj: return "&" + name;
    }
    return "?";
}

void require_valid(const FirmwareModule& module) {
    auto diags = validate(module);
    if (!diags.empty()) {
        std::string what = "invalid module: " + diags.front().to_string();
        throw InvalidModule(what, std::move(diags));
    }
}

namespace {

class AndersenSolver {
public:
    explicit AndersenSolver(const FirmwareModule& m) : m_(m) {}

    PointsToResult solve() {
        index_locations();
        collect_constraints();
        run_worklist();

        PointsToResult out;
        out.iterations = iterations_;
        out.iteration_bound = bound_;
        for (std::size_t n = 0; n < locs_.size(); ++n) {
            if (pts_[n].empty())
                continue;
            FunctionSet names;
            for (int f : pts_[n])
                names.insert(fn_names_[f]);
            out.pts.emplace(locs_[n], std::move(names));
        }
        return out;
    }

private:
    struct IndirectSite {
        std::vector<int> args;
        int dst = -1;
        std::set<int> resolved;
    };

    int add_loc(AbstractLocation loc) {
        int id = static_cast<int>(locs_.size());
        index_.emplace(loc, id);
        locs_.push_back(std::move(loc));
        return id;
    }

    int node(const std::string& fn, const std::string& v) const {
        return index_.at(AbstractLocation::var(fn, v));
    }

    void index_locations() {
        for (const auto& [name, fn] : m_.functions) {
            fn_index_.emplace(name, static_cast<int>(fn_names_.size()));
            fn_names_.push_back(name);
            for (const auto& p : fn.params)
                add_loc(AbstractLocation::var(name, p.name));
            for (const auto& [v, t] : fn.locals)
                add_loc(AbstractLocation::var(name, v));
        }
        for (const auto& [g, rec] : m_.globals) {
            add_loc(AbstractLocation::global(g));
            for (const auto& f : m_.records.at(rec).fields())
                add_loc(AbstractLocation::field(g, f.name));
        }
        // Function objects are sinks: counted for the bound, never graph nodes.
        bound_ = (locs_.size() + fn_names_.size()) * fn_names_.size();

        succ_.resize(locs_.size());
        sites_by_ref_.resize(locs_.size());
        pts_.resize(locs_.size());
        delta_.resize(locs_.size());
        queued_.assign(locs_.size(), false);

        for (const auto& [name, fn] : m_.functions) {
            auto& rets = ret_nodes_[name];
            for (const auto& i : fn.body)
                if (is_return(i.op) && !i.src.empty())
                    rets.push_back(node(name, i.src));
        }
    }

    void bind_call(const std::vector<int>& args, int dst, const std::string& callee) {
        const FunctionDef& f = m_.functions.at(callee);
        std::size_t n = std::min(args.size(), f.params.size());
        for (std::size_t k = 0; k < n; ++k)
            add_edge(args[k], node(callee, f.params[k].name));
        if (dst >= 0)
            for (int r : ret_nodes_.at(callee))
                add_edge(r, dst);
    }

    void collect_constraints() {
        for (const auto& [name, fn] : m_.functions) {
            for (const auto& i : fn.body) {
                switch (i.op) {
                case Opcode::AddrOf:
                    insert(node(name, i.dst), fn_index_.at(i.symbol));
                    break;
                case Opcode::Assign:
                    add_edge(node(name, i.src), node(name, i.dst));
                    break;
                case Opcode::FieldStore:
                    add_edge(node(name, i.src), index_.at(AbstractLocation::field(i.base, i.symbol)));
                    break;
                case Opcode::FieldLoad:
                    add_edge(index_.at(AbstractLocation::field(i.base, i.symbol)), node(name, i.dst));
                    break;
                case Opcode::CallDirect: {
                    std::vector<int> args;
                    for (const auto& a : i.args)
                        args.push_back(node(name, a));
                    bind_call(args, i.dst.empty() ? -1 : node(name, i.dst), i.symbol);
                    break;
                }
                case Opcode::CallIndirect:
                case Opcode::MonitoredCall: {
                    IndirectSite site;
                    for (const auto& a : i.args)
                        site.args.push_back(node(name, a));
                    site.dst = i.dst.empty() ? -1 : node(name, i.dst);
                    sites_.push_back(std::move(site));
                    sites_by_ref_[node(name, i.src)].push_back(sites_.size() - 1);
                    break;
                }
                default:
                    break;
                }
            }
        }
    }

    void enqueue(int n) {
        queued_[n] = true;
        queue_.push_back(n);
    }

    void insert(int n, int fn) {
        if (pts_[n].insert(fn).second) {
            delta_[n].insert(fn);
            if (!queued_[n])
                enqueue(n);
        }
    }

    void add_edge(int from, int to) {
        if (from == to || !edges_.emplace(from, to).second)
            return;
        succ_[from].push_back(to);
        for (int f : pts_[from])
            insert(to, f);
    }

    void run_worklist() {
        while (!queue_.empty()) {
            int n = queue_.front();
            queue_.pop_front();
            queued_[n] = false;
            ++iterations_;
            std::set<int> d = std::move(delta_[n]);
            delta_[n].clear();
            for (std::size_t k = 0; k < succ_[n].size(); ++k)
                for (int f : d)
                    insert(succ_[n][k], f);
            for (std::size_t s : sites_by_ref_[n]) {
                for (int f : d) {
                    if (!sites_[s].resolved.insert(f).second)
                        continue;
                    bind_call(sites_[s].args, sites_[s].dst, fn_names_[f]);
                }
            }
        }
        if (iterations_ > bound_)
            throw std::logic_error("points-to solver exceeded its iteration bound");
    }

    const FirmwareModule& m_;
    std::vector<AbstractLocation> locs_;
    std::map<AbstractLocation, int> index_;
    std::vector<std::string> fn_names_;
    std::map<std::string, int> fn_index_;
    std::map<std::string, std::vector<int>> ret_nodes_;

    std::vector<std::vector<int>> succ_;
    std::set<std::pair<int, int>> edges_;
    std::vector<IndirectSite> sites_;
    std::vector<std::vector<std::size_t>> sites_by_ref_;

    std::vector<std::set<int>> pts_;
    std::vector<std::set<int>> delta_;
    std::vector<bool> queued_;
    std::deque<int> queue_;
    std::size_t iterations_ = 0;
    std::size_t bound_ = 0;
};

const FunctionSet kEmpty;

} // namespace

PointsToResult solve_andersen(const FirmwareModule& module) {
    require_valid(module);
    return AndersenSolver(module).solve();
}

const FunctionSet& pts_of(const PointsToResult& result, const AbstractLocation& loc) {
    if (loc.kind == AbstractLocation::Kind::FuncObj)
        return kEmpty;
    auto it = result.pts.find(loc);
    return it == result.pts.end() ? kEmpty : it->second;
}

std::string dump_points_to(const PointsToResult& result) {
    std::vector<std::string> lines;
    for (const auto& [loc, fns] : result.pts) {
        std::string line = loc.to_string() + " -> {";
        bool first = true;
        for (const auto& f : fns) {
            line += (first ? "" : ",") + f;
            first = false;
        }
        line += "}";
        lines.push_back(std::move(line));
    }
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const auto& l : lines)
        out += l + '\n';
    return out;
}

} // namespace modeguard
