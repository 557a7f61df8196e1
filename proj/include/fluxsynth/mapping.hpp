/*!
  \file mapping.hpp
  \brief Technology mapping of marked components onto library cells

  Each marked component is looked up by its sorted effect signature, first
  among the storage cells and then among the supergates. AND groups become
  the library's AND cell and merge nets become confluence-buffer trees.

  When no exact signature exists, two fallbacks are tried in order:

  - a relaxed match, where every marked port is served by a distinct cell
    port with the same modifying effects and possibly extra read effects;
    unused pins are tied to `_nc` nets;
  - merging duplicate idempotent ports ({set} or {clear}) of one component
    through a confluence buffer, which shrinks the signature.

  Instances are named `q<bit>`; supergate bodies are flattened with the
  prefix `q<bit>_`.
*/

#pragma once

#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include <fmt/format.h>

#include "marking.hpp"
#include "netlist.hpp"

namespace fluxsynth
{

/*! \brief Why one encoding could not be mapped. */
struct mapping_failure
{
  std::vector<std::string> unmapped; /* per component: "Q<b> <signature>" */
  std::vector<std::string> signatures;
  std::vector<std::string> reasons;

  std::string summary() const
  {
    std::string s;
    for ( auto const& u : unmapped )
      s += ( s.empty() ? "" : "; " ) + u;
    for ( auto const& r : reasons )
      s += ( s.empty() ? "" : "; " ) + r;
    return s;
  }
};

using mapping_result = std::variant<netlist, mapping_failure>;

namespace detail
{

/* Assigns marked ports to target ports; result[i] = target port of marked port i. */
inline std::optional<std::vector<uint32_t>> assign_ports( std::vector<port> const& marked, std::vector<cell_port> const& target,
                                                        bool exact )
{
  if ( exact && marked.size() != target.size() )
    return std::nullopt;
  if ( marked.size() > target.size() )
    return std::nullopt;
  auto fits = [&]( uint8_t want, uint8_t have ) {
    if ( exact )
      return want == have;
    return ( want & fx_modify ) == ( have & fx_modify ) && ( want & have ) == want;
  };

  /* marked ports in (effects, net) order make the result independent of port order */
  std::vector<uint32_t> order( marked.size() );
  std::iota( order.begin(), order.end(), 0u );
  std::sort( order.begin(), order.end(), [&]( uint32_t a, uint32_t b ) {
    return std::tie( marked[a].effects, marked[a].net ) < std::tie( marked[b].effects, marked[b].net );
  } );

  std::vector<uint32_t> result( marked.size(), UINT32_MAX );
  std::vector<bool> used( target.size(), false );
  std::function<bool( std::size_t )> place = [&]( std::size_t k ) {
    if ( k == order.size() )
      return true;
    auto const i = order[k];
    for ( uint32_t t = 0; t < target.size(); ++t )
    {
      if ( used[t] || !fits( marked[i].effects, target[t].effects ) )
        continue;
      used[t] = true;
      result[i] = t;
      if ( place( k + 1 ) )
        return true;
      used[t] = false;
    }
    return false;
  };
  if ( !place( 0 ) )
    return std::nullopt;
  return result;
}

inline uint32_t supergate_jj( supergate const& g, pdk const& lib )
{
  uint32_t jj = 0;
  for ( auto const& i : g.body )
    jj += lib.get_cell( i.cell ).jj_count;
  return jj;
}

class mapper
{
public:
  mapper( marked_design const& d, pdk const& lib, std::string name ) : d_( d ), lib_( lib )
  {
    n_.name = std::move( name );
    n_.inputs = d.inputs;
    for ( auto const& n : d.nets )
      if ( n.type == generated_net::kind::read )
        reads_[{ n.source_bit, n.by, n.positive }] = n.name;
  }

  mapping_result run()
  {
    for ( auto const& v : read_order_violations( d_ ) )
      failure_.reasons.push_back( v );
    if ( !failure_.reasons.empty() )
      return failure_;

    std::set<uint32_t> grouped;
    for ( auto const& g : d_.and_groups )
    {
      grouped.insert( g.bit_a );
      grouped.insert( g.bit_b );
    }

    for ( auto const& c : d_.components )
    {
      for ( auto const& g : d_.and_groups )
        if ( g.bit_a == c.bit )
          emit_and( g );
      if ( !grouped.count( c.bit ) )
        map_component( c );
    }
    for ( auto const& n : d_.nets )
      if ( n.type == generated_net::kind::merge )
        emit_merge_tree( n.name, n.terms, "cb_" + n.name );

    if ( !failure_.unmapped.empty() )
      return failure_;

    for ( uint32_t o = 0; o < d_.outputs.size(); ++o )
      n_.outputs.emplace_back( d_.outputs[o], d_.output_nets[o] );

    check_drivers();
    if ( !failure_.reasons.empty() )
      return failure_;

    ordered_json census = ordered_json::object();
    for ( auto const& [cell, count] : n_.census( &lib_ ) )
      census[cell] = count;
    n_.metadata["census"] = census;
    n_.metadata["supergates"] = supergates_used_;
    n_.metadata["and_groups"] = d_.and_groups.size();
    std::vector<std::string> unused;
    for ( auto const& i : n_.inputs )
      if ( !consumed( i ) )
        unused.push_back( i );
    n_.metadata["unused_inputs"] = unused;
    return n_;
  }

private:
  struct read_key
  {
    uint32_t bit;
    std::string by;
    bool positive;
    auto operator<=>( read_key const& ) const = default;
  };

  bool consumed( std::string const& net ) const
  {
    for ( auto const& i : n_.instances )
    {
      auto const& c = lib_.get_cell( i.cell );
      for ( auto const& [pin, bound] : i.pins )
        if ( bound == net && !c.is_output_pin( pin ) )
          return true;
    }
    for ( auto const& [o, net2] : n_.outputs )
      if ( net2 == net )
        return true;
    return false;
  }

  std::string read_net( uint32_t bit, std::string const& by, bool positive, std::string const& fallback ) const
  {
    if ( auto it = reads_.find( { bit, by, positive } ); it != reads_.end() )
      return it->second;
    return fallback;
  }

  void emit_and( and_group const& g )
  {
    auto const& c = lib_.require( cell_kind::and_, "AND groups" );
    instance i{ fmt::format( "q{}q{}", g.bit_a, g.bit_b ), c.name, {} };
    bool first_data = true;
    for ( auto const& p : c.ports )
    {
      if ( p.effects & fx_read )
      {
        i.pins.emplace_back( p.name, g.trigger );
        continue;
      }
      i.pins.emplace_back( p.name, first_data ? g.set_a : g.set_b );
      first_data = false;
    }
    for ( auto const& p : c.ports )
      if ( p.effects & fx_out )
        i.pins.emplace_back( p.out_pin, g.output_net );
    n_.instances.push_back( std::move( i ) );
  }

  /* balanced tree of 2-input merge cells; the root drives `net` */
  void emit_merge_tree( std::string const& net, std::vector<std::string> terms, std::string const& prefix )
  {
    auto const& c = lib_.require( cell_kind::merge, "merge nets" );
    if ( c.ports.size() < 2 )
      throw validation_error( fmt::format( "merge cell {} needs at least two inputs", c.name ) );
    uint32_t k = 0;
    auto const total = terms.size() - 1;
    while ( terms.size() > 1 )
    {
      std::vector<std::string> next;
      for ( std::size_t j = 0; j + 1 < terms.size(); j += 2 )
      {
        auto const name = total == 1 ? prefix : fmt::format( "{}_{}", prefix, k );
        auto const out = terms.size() == 2 ? net : fmt::format( "{}_m{}", prefix, k );
        instance i{ name, c.name, {} };
        i.pins.emplace_back( c.ports[0].name, terms[j] );
        i.pins.emplace_back( c.ports[1].name, terms[j + 1] );
        for ( std::size_t extra = 2; extra < c.ports.size(); ++extra )
          i.pins.emplace_back( c.ports[extra].name, fmt::format( "{}_nc_{}", name, c.ports[extra].name ) );
        i.pins.emplace_back( c.outputs.front(), out );
        for ( std::size_t extra = 1; extra < c.outputs.size(); ++extra )
          i.pins.emplace_back( c.outputs[extra], fmt::format( "{}_nc_{}", name, c.outputs[extra] ) );
        n_.instances.push_back( std::move( i ) );
        next.push_back( out );
        ++k;
      }
      if ( terms.size() % 2 )
        next.push_back( terms.back() );
      terms = std::move( next );
    }
  }

  /* net bound to the out (or nout) pin of target port `tp` serving marked port `mp` */
  std::string pin_net( uint32_t bit, port const* mp, bool positive, std::string const& nc ) const
  {
    if ( !mp || !( mp->effects & ( positive ? fx_out : fx_nout ) ) )
      return nc;
    return read_net( bit, mp->net, positive, nc );
  }

  void emit_cell( uint32_t bit, std::vector<port> const& ports, cell const& c, std::vector<uint32_t> const& assign )
  {
    auto const name = fmt::format( "q{}", bit );
    std::vector<port const*> served( c.ports.size(), nullptr );
    for ( std::size_t i = 0; i < ports.size(); ++i )
      served[assign[i]] = &ports[i];
    instance inst{ name, c.name, {} };
    for ( std::size_t t = 0; t < c.ports.size(); ++t )
      inst.pins.emplace_back( c.ports[t].name,
                              served[t] ? served[t]->net : fmt::format( "{}_nc_{}", name, c.ports[t].name ) );
    for ( std::size_t t = 0; t < c.ports.size(); ++t )
    {
      auto const& p = c.ports[t];
      if ( p.effects & fx_out )
        inst.pins.emplace_back( p.out_pin, pin_net( bit, served[t], true, fmt::format( "{}_nc_{}", name, p.out_pin ) ) );
      if ( p.effects & fx_nout )
        inst.pins.emplace_back( p.nout_pin, pin_net( bit, served[t], false, fmt::format( "{}_nc_{}", name, p.nout_pin ) ) );
    }
    n_.instances.push_back( std::move( inst ) );
  }

  void emit_supergate( uint32_t bit, std::vector<port> const& ports, supergate const& g, std::vector<uint32_t> const& assign )
  {
    auto const prefix = fmt::format( "q{}_", bit );
    std::map<std::string, std::string> actual; /* body net -> netlist net */
    std::vector<port const*> served( g.ports.size(), nullptr );
    for ( std::size_t i = 0; i < ports.size(); ++i )
      served[assign[i]] = &ports[i];
    for ( std::size_t t = 0; t < g.ports.size(); ++t )
    {
      auto const& p = g.ports[t];
      actual[p.name] = served[t] ? served[t]->net : prefix + "nc_" + p.name;
      if ( ( p.effects & fx_out ) && served[t] && ( served[t]->effects & fx_out ) )
        actual[p.out_pin] = read_net( bit, served[t]->net, true, prefix + p.out_pin );
      if ( ( p.effects & fx_nout ) && served[t] && ( served[t]->effects & fx_nout ) )
        actual[p.nout_pin] = read_net( bit, served[t]->net, false, prefix + p.nout_pin );
    }
    for ( auto const& b : g.body )
    {
      instance inst{ prefix + b.name, b.cell, {} };
      for ( auto const& [pin, net] : b.pins )
      {
        auto it = actual.find( net );
        inst.pins.emplace_back( pin, it != actual.end() ? it->second : prefix + net );
      }
      n_.instances.push_back( std::move( inst ) );
    }
    if ( std::find( supergates_used_.begin(), supergates_used_.end(), g.name ) == supergates_used_.end() )
      supergates_used_.push_back( g.name );
  }

  /* cheapest candidate among cells, then supergates, for one matching mode */
  bool try_map( uint32_t bit, std::vector<port> const& ports, bool exact )
  {
    cell const* best = nullptr;
    std::vector<uint32_t> best_assign;
    for ( auto const& c : lib_.cells )
    {
      if ( c.kind != cell_kind::storage )
        continue;
      auto a = assign_ports( ports, c.ports, exact );
      if ( a && ( !best || std::tie( c.jj_count, c.name ) < std::tie( best->jj_count, best->name ) ) )
      {
        best = &c;
        best_assign = *a;
      }
    }
    if ( best )
    {
      emit_cell( bit, ports, *best, best_assign );
      return true;
    }

    supergate const* best_g = nullptr;
    uint32_t best_jj = 0;
    for ( auto const& g : lib_.supergates )
    {
      auto a = assign_ports( ports, g.ports, exact );
      if ( !a )
        continue;
      auto const jj = supergate_jj( g, lib_ );
      if ( !best_g || std::tie( jj, g.name ) < std::tie( best_jj, best_g->name ) )
      {
        best_g = &g;
        best_jj = jj;
        best_assign = *a;
      }
    }
    if ( best_g )
    {
      emit_supergate( bit, ports, *best_g, best_assign );
      return true;
    }
    return false;
  }

  void map_component( marked_component const& c )
  {
    auto ports = c.ports;
    if ( try_map( c.bit, ports, true ) || try_map( c.bit, ports, false ) )
      return;

    /* fold duplicate idempotent ports into one through a merge cell */
    bool folded = false;
    for ( uint8_t fx : { fx_set, fx_clear } )
    {
      std::vector<std::string> terms;
      for ( auto const& p : ports )
        if ( p.effects == fx )
          terms.push_back( p.net );
      if ( terms.size() < 2 || !lib_.cheapest( cell_kind::merge ) )
        continue;
      std::sort( terms.begin(), terms.end() );
      auto const net = fmt::format( "q{}_{}", c.bit, fx == fx_set ? "set" : "clear" );
      ports.erase( std::remove_if( ports.begin(), ports.end(), [&]( port const& p ) { return p.effects == fx; } ), ports.end() );
      ports.push_back( { net, fx } );
      pending_merges_.push_back( { net, terms } );
      folded = true;
    }
    if ( folded && ( try_map( c.bit, ports, true ) || try_map( c.bit, ports, false ) ) )
    {
      for ( auto const& [net, terms] : pending_merges_ )
        emit_merge_tree( net, terms, "cb_" + net );
      pending_merges_.clear();
      return;
    }
    pending_merges_.clear();

    std::vector<uint8_t> fx;
    for ( auto const& p : c.ports )
      fx.push_back( p.effects );
    auto const sig = signature_to_string( make_signature( fx ) );
    failure_.unmapped.push_back( fmt::format( "Q{} {}", c.bit, sig ) );
    failure_.signatures.push_back( sig );
  }

  void check_drivers()
  {
    std::map<std::string, uint32_t> drivers;
    for ( auto const& i : n_.inputs )
      ++drivers[i];
    for ( auto const& i : n_.instances )
    {
      auto const& c = lib_.get_cell( i.cell );
      for ( auto const& [pin, net] : i.pins )
        if ( c.is_output_pin( pin ) )
          ++drivers[net];
    }
    for ( auto const& n : d_.nets )
      if ( d_.consumers( n.name ) != 0 && drivers[n.name] != 1 )
      {
        bool absorbed = false;
        for ( auto const& g : d_.and_groups )
          absorbed = absorbed || g.chain_net == n.name;
        if ( !absorbed )
          failure_.reasons.push_back( fmt::format( "net {} has {} drivers", n.name, drivers[n.name] ) );
      }
    for ( auto const& [o, net] : n_.outputs )
      if ( !net.empty() && drivers[net] != 1 )
        failure_.reasons.push_back( fmt::format( "output {} net {} has {} drivers", o, net, drivers[net] ) );
  }

  marked_design const& d_;
  pdk const& lib_;
  netlist n_;
  mapping_failure failure_;
  std::map<read_key, std::string> reads_;
  std::vector<std::string> supergates_used_;
  std::vector<std::pair<std::string, std::vector<std::string>>> pending_merges_;
};

} // namespace detail

/*! \brief Maps one marked design; AND groups must already be recognized. */
inline mapping_result map_components( marked_design const& d, pdk const& lib, std::string const& name = "top" )
{
  return detail::mapper( d, lib, name ).run();
}

/*! \brief Gate count, junctions, power and an illustrative pre-layout frequency. */
struct cost_report
{
  uint32_t gates{ 0 };
  uint32_t jj{ 0 };
  double power{ 0 };
  double critical_delay{ 0 }; /* ps */
  double frequency{ 0 };      /* GHz, 0 when there is no path */

  bool operator==( cost_report const& ) const = default;
};

/*! \brief Instance-level data edges (driver instance -> sink instance), deduplicated. */
inline std::vector<std::vector<uint32_t>> data_edges( netlist const& n, pdk const& lib )
{
  std::map<std::string, uint32_t> driver;
  for ( uint32_t i = 0; i < n.instances.size(); ++i )
  {
    auto const& c = lib.get_cell( n.instances[i].cell );
    for ( auto const& [pin, net] : n.instances[i].pins )
      if ( c.is_output_pin( pin ) )
        driver[net] = i;
  }
  std::vector<std::vector<uint32_t>> succ( n.instances.size() );
  for ( uint32_t i = 0; i < n.instances.size(); ++i )
  {
    auto const& c = lib.get_cell( n.instances[i].cell );
    for ( auto const& [pin, net] : n.instances[i].pins )
      if ( !c.is_output_pin( pin ) )
        if ( auto it = driver.find( net ); it != driver.end() )
          succ[it->second].push_back( i );
  }
  for ( auto& s : succ )
  {
    std::sort( s.begin(), s.end() );
    s.erase( std::unique( s.begin(), s.end() ), s.end() );
  }
  return succ;
}

/*! \brief True iff the instance data-edge graph has a directed cycle (Kahn's algorithm). */
inline bool has_data_cycle( netlist const& n, pdk const& lib )
{
  auto const succ = data_edges( n, lib );
  std::vector<uint32_t> indeg( succ.size(), 0 );
  for ( auto const& s : succ )
    for ( auto v : s )
      ++indeg[v];
  std::vector<uint32_t> ready;
  for ( uint32_t v = 0; v < succ.size(); ++v )
    if ( !indeg[v] )
      ready.push_back( v );
  std::size_t seen = 0;
  while ( !ready.empty() )
  {
    auto const v = ready.back();
    ready.pop_back();
    ++seen;
    for ( auto w : succ[v] )
      if ( --indeg[w] == 0 )
        ready.push_back( w );
  }
  return seen != succ.size();
}

/*! \brief Costs of a netlist; split cells are not counted as gates.
 *
 * The critical delay is the heaviest instance path of the data-edge graph
 * with feedback edges removed. Frequencies derived from it are pre-layout
 * and only as meaningful as the library's delay figures.
 */
inline cost_report report( netlist const& n, pdk const& lib )
{
  cost_report r;
  for ( auto const& i : n.instances )
  {
    auto const& c = lib.get_cell( i.cell );
    if ( c.kind != cell_kind::split )
      ++r.gates;
    r.jj += c.jj_count;
    r.power += c.power;
  }

  auto const succ = data_edges( n, lib );
  std::vector<uint8_t> mark( succ.size(), 0 );
  std::vector<double> longest( succ.size(), 0 );
  std::function<void( uint32_t )> visit = [&]( uint32_t v ) {
    mark[v] = 1;
    double tail = 0;
    for ( auto w : succ[v] )
    {
      if ( mark[w] == 1 )
        continue; /* feedback edge */
      if ( mark[w] == 0 )
        visit( w );
      tail = std::max( tail, longest[w] );
    }
    longest[v] = lib.get_cell( n.instances[v].cell ).delay + tail;
    mark[v] = 2;
  };
  for ( uint32_t v = 0; v < succ.size(); ++v )
    if ( !mark[v] )
      visit( v );
  for ( auto l : longest )
    r.critical_delay = std::max( r.critical_delay, l );
  r.frequency = r.critical_delay > 0 ? 1000.0 / r.critical_delay : 0.0;
  return r;
}

/*! \brief Summary table: one row per circuit (state count as text, "-" when unknown), frequency and power marked illustrative. */
inline std::string format_report_table( std::vector<std::tuple<std::string, std::string, cost_report>> const& rows )
{
  std::string s = fmt::format( "{:<20} {:>12} {:>7} {:>7} {:>22} {:>16}\n", "Circuit", "#States", "#Gates", "#JJs",
                               "Freq GHz (pre-layout)", "Power uW (illus.)" );
  for ( auto const& [name, states, r] : rows )
    s += fmt::format( "{:<20} {:>12} {:>7} {:>7} {:>22.2f} {:>16.2f}\n", name, states, r.gates, r.jj, r.frequency, r.power );
  s += "JJ, frequency and power figures come from the library's illustrative values.\n";
  return s;
}

} // namespace fluxsynth
