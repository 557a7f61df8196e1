/*!
  \file balancer.hpp
  \brief Path balancing of combinational gate networks and splitter insertion

  Combinational networks use a small line format:

      # comment
      .inputs a b c
      .outputs y
      n1 = AND a b
      y = OR n1 c
      .end

  Gates are AND, OR, XOR (two fanins) and NOT (one fanin). Every gate is
  replaced by its clocked cell, with a shared clock net `clk`, and each edge
  that skips logic levels gets a chain of D flip-flops.
*/

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "netlist.hpp"

namespace fluxsynth
{

enum class comb_op : uint8_t
{
  and_,
  or_,
  xor_,
  not_
};

inline char const* to_string( comb_op op )
{
  switch ( op )
  {
  case comb_op::and_:
    return "AND";
  case comb_op::or_:
    return "OR";
  case comb_op::xor_:
    return "XOR";
  case comb_op::not_:
    return "NOT";
  }
  return "?";
}

struct comb_gate
{
  std::string name; /* also the net it drives */
  comb_op op{ comb_op::and_ };
  std::vector<std::string> fanins;

  bool operator==( comb_gate const& ) const = default;
};

struct comb_netlist
{
  std::string name{ "comb" };
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<comb_gate> gates;

  bool operator==( comb_netlist const& ) const = default;

  comb_gate const* find( std::string const& net ) const
  {
    for ( auto const& g : gates )
      if ( g.name == net )
        return &g;
    return nullptr;
  }

  bool is_input( std::string const& net ) const { return std::find( inputs.begin(), inputs.end(), net ) != inputs.end(); }
};

/*! \brief Parses the combinational line format; rejects undefined or doubly driven nets. */
inline comb_netlist parse_comb( std::string const& text )
{
  comb_netlist n;
  std::istringstream in( text );
  std::string line;
  uint32_t lineno = 0;
  bool ended = false;
  std::set<std::string> driven;
  auto drive = [&]( std::string const& net ) {
    if ( !driven.insert( net ).second )
      throw parse_error( lineno, fmt::format( "net '{}' is driven more than once", net ) );
  };
  while ( std::getline( in, line ) )
  {
    ++lineno;
    if ( auto hash = line.find( '#' ); hash != std::string::npos )
      line.erase( hash );
    std::istringstream ls( line );
    std::vector<std::string> tok;
    for ( std::string t; ls >> t; )
      tok.push_back( t );
    if ( tok.empty() )
      continue;
    if ( ended )
      throw parse_error( lineno, "content after .end" );
    if ( tok[0] == ".name" && tok.size() == 2 )
      n.name = tok[1];
    else if ( tok[0] == ".inputs" )
      for ( std::size_t i = 1; i < tok.size(); ++i )
      {
        drive( tok[i] );
        n.inputs.push_back( tok[i] );
      }
    else if ( tok[0] == ".outputs" )
      n.outputs.insert( n.outputs.end(), tok.begin() + 1, tok.end() );
    else if ( tok[0] == ".end" )
      ended = true;
    else if ( tok.size() >= 3 && tok[1] == "=" )
    {
      comb_gate g;
      g.name = tok[0];
      auto const& op = tok[2];
      std::size_t arity = 2;
      if ( op == "AND" )
        g.op = comb_op::and_;
      else if ( op == "OR" )
        g.op = comb_op::or_;
      else if ( op == "XOR" )
        g.op = comb_op::xor_;
      else if ( op == "NOT" )
      {
        g.op = comb_op::not_;
        arity = 1;
      }
      else
        throw parse_error( lineno, fmt::format( "unknown gate '{}'", op ) );
      g.fanins.assign( tok.begin() + 3, tok.end() );
      if ( g.fanins.size() != arity )
        throw parse_error( lineno, fmt::format( "{} expects {} fanin{}, got {}", op, arity, arity == 1 ? "" : "s", g.fanins.size() ) );
      drive( g.name );
      n.gates.push_back( std::move( g ) );
    }
    else
      throw parse_error( lineno, fmt::format( "cannot parse '{}'", line ) );
  }
  for ( auto const& g : n.gates )
    for ( auto const& f : g.fanins )
      if ( !driven.count( f ) )
        throw validation_error( fmt::format( "gate {} reads undefined net '{}'", g.name, f ) );
  for ( auto const& o : n.outputs )
    if ( !driven.count( o ) )
      throw validation_error( fmt::format( "output '{}' is not driven", o ) );
  return n;
}

inline std::string write_comb( comb_netlist const& n )
{
  std::string s = fmt::format( ".name {}\n.inputs", n.name );
  for ( auto const& i : n.inputs )
    s += " " + i;
  s += "\n.outputs";
  for ( auto const& o : n.outputs )
    s += " " + o;
  s += "\n";
  for ( auto const& g : n.gates )
  {
    s += fmt::format( "{} = {}", g.name, to_string( g.op ) );
    for ( auto const& f : g.fanins )
      s += " " + f;
    s += "\n";
  }
  return s + ".end\n";
}

/*! \brief Longest-path logic depth of every net; primary inputs have depth 0. */
inline std::map<std::string, uint32_t> compute_depths( comb_netlist const& n )
{
  std::map<std::string, uint32_t> depth;
  for ( auto const& i : n.inputs )
    depth[i] = 0;
  std::map<std::string, comb_gate const*> by_name;
  for ( auto const& g : n.gates )
    by_name[g.name] = &g;

  std::map<std::string, uint8_t> mark; /* 1 on stack, 2 done */
  std::function<uint32_t( std::string const& )> visit = [&]( std::string const& net ) -> uint32_t {
    if ( auto it = depth.find( net ); it != depth.end() )
      return it->second;
    auto it = by_name.find( net );
    if ( it == by_name.end() )
      throw validation_error( fmt::format( "net '{}' has no driver", net ) );
    if ( mark[net] == 1 )
      throw validation_error( fmt::format( "combinational cycle through net '{}'", net ) );
    mark[net] = 1;
    uint32_t d = 0;
    for ( auto const& f : it->second->fanins )
      d = std::max( d, visit( f ) );
    mark[net] = 2;
    return depth[net] = d + 1;
  };
  for ( auto const& g : n.gates )
    visit( g.name );
  return depth;
}

/*! \brief Zero-delay Boolean evaluation; `values` holds one entry per primary input. */
inline std::vector<bool> evaluate_comb( comb_netlist const& n, std::vector<bool> const& values )
{
  std::map<std::string, bool> v;
  for ( std::size_t i = 0; i < n.inputs.size(); ++i )
    v[n.inputs[i]] = values.at( i );
  auto const depth = compute_depths( n );
  std::vector<comb_gate const*> order;
  for ( auto const& g : n.gates )
    order.push_back( &g );
  std::stable_sort( order.begin(), order.end(),
                    [&]( auto a, auto b ) { return depth.at( a->name ) < depth.at( b->name ); } );
  for ( auto const* g : order )
  {
    auto const a = v.at( g->fanins[0] );
    switch ( g->op )
    {
    case comb_op::and_:
      v[g->name] = a && v.at( g->fanins[1] );
      break;
    case comb_op::or_:
      v[g->name] = a || v.at( g->fanins[1] );
      break;
    case comb_op::xor_:
      v[g->name] = a != v.at( g->fanins[1] );
      break;
    case comb_op::not_:
      v[g->name] = !a;
      break;
    }
  }
  std::vector<bool> out;
  for ( auto const& o : n.outputs )
    out.push_back( v.at( o ) );
  return out;
}

struct balance_options
{
  /*! \brief Pad every output to the deepest output so all results leave on the same clock. */
  bool align_outputs{ false };
};

struct balance_result
{
  netlist net;
  uint32_t dffs_inserted{ 0 };
  std::map<std::string, uint32_t> depths;
  uint32_t max_depth{ 0 };
};

inline constexpr char const* clock_net = "clk";

/*! \brief Clocked netlist where every fanin edge of a gate spans exactly one logic level.
 *
 * An edge from depth d to depth d' receives d' - d - 1 D flip-flops. Outputs
 * of depth k pulse on the k-th clock after their inputs.
 */
inline balance_result balance_paths( comb_netlist const& n, pdk const& lib, balance_options const& opt = {} )
{
  balance_result r;
  r.depths = compute_depths( n );
  for ( auto const& [net, d] : r.depths )
    r.max_depth = std::max( r.max_depth, d );
  if ( std::find( n.inputs.begin(), n.inputs.end(), clock_net ) != n.inputs.end() || n.find( clock_net ) )
    throw validation_error( fmt::format( "net name '{}' is reserved for the clock", clock_net ) );

  auto const* dff = lib.storage_with( make_signature( { fx_set, fx_out | fx_clear } ) );
  auto const* inv = lib.storage_with( make_signature( { fx_set, fx_nout | fx_clear } ) );
  auto gate_cell = [&]( comb_op op ) -> cell const& {
    switch ( op )
    {
    case comb_op::and_:
      return lib.require( cell_kind::and_, "AND gates" );
    case comb_op::or_:
      return lib.require( cell_kind::or_, "OR gates" );
    case comb_op::xor_:
      return lib.require( cell_kind::xor_, "XOR gates" );
    case comb_op::not_:
      if ( !inv )
        throw validation_error( "library has no (0,5) storage cell for NOT gates" );
      return *inv;
    }
    throw validation_error( "unknown gate" );
  };

  auto& net = r.net;
  net.name = n.name;
  net.inputs = n.inputs;
  net.inputs.push_back( clock_net );

  auto chain = [&]( std::string src, uint32_t length, std::string const& tag ) {
    if ( length && !dff )
      throw validation_error( "library has no (0,4) D flip-flop for path balancing" );
    for ( uint32_t k = 1; k <= length; ++k )
    {
      auto const name = fmt::format( "dff_{}_{}", tag, k );
      auto const out = fmt::format( "{}_d{}", tag, k );
      instance i{ name, dff->name, {} };
      for ( auto const& p : dff->ports )
        i.pins.emplace_back( p.name, ( p.effects & fx_read ) ? std::string( clock_net ) : src );
      for ( auto const& p : dff->ports )
        if ( p.effects & fx_out )
          i.pins.emplace_back( p.out_pin, out );
      net.instances.push_back( std::move( i ) );
      src = out;
      ++r.dffs_inserted;
    }
    return src;
  };

  for ( auto const& g : n.gates )
  {
    auto const& c = gate_cell( g.op );
    auto const d = r.depths.at( g.name );
    std::vector<std::string> fanin_nets;
    for ( std::size_t k = 0; k < g.fanins.size(); ++k )
    {
      auto const& f = g.fanins[k];
      fanin_nets.push_back( chain( f, d - r.depths.at( f ) - 1, fmt::format( "{}_{}{}", f, g.name, k ) ) );
    }
    instance i{ "g_" + g.name, c.name, {} };
    std::size_t next = 0;
    for ( auto const& p : c.ports )
      i.pins.emplace_back( p.name, ( p.effects & fx_read ) ? std::string( clock_net ) : fanin_nets.at( next++ ) );
    for ( auto const& p : c.ports )
    {
      if ( p.effects & fx_out )
        i.pins.emplace_back( p.out_pin, g.name );
      if ( p.effects & fx_nout )
        i.pins.emplace_back( p.nout_pin, g.name );
    }
    net.instances.push_back( std::move( i ) );
  }

  uint32_t out_depth = 0;
  for ( auto const& o : n.outputs )
    out_depth = std::max( out_depth, r.depths.at( o ) );
  for ( auto const& o : n.outputs )
  {
    auto const pad = opt.align_outputs ? out_depth - r.depths.at( o ) : 0u;
    net.outputs.emplace_back( o, chain( o, pad, "out_" + o ) );
  }
  net.metadata["dffs_inserted"] = r.dffs_inserted;
  net.metadata["logic_depth"] = out_depth;
  return r;
}

/*! \brief Rebuilds fanout so that no net feeds more than `max_fanout` sinks.
 *
 * Sinks are instance input pins and primary outputs. An overloaded net gets
 * a balanced tree of splitter cells; with two-output splitters a net with k
 * sinks receives k - 1 of them. Returns the number of splitters inserted.
 */
inline uint32_t insert_splitters( netlist& n, pdk const& lib, uint32_t max_fanout = 2 )
{
  if ( max_fanout < 2 )
    throw validation_error( "splitter fanout limit must be at least 2" );
  auto const& sc = lib.require( cell_kind::split, "fanout legalization" );
  auto const arity = static_cast<uint32_t>( std::min<std::size_t>( sc.outputs.size(), max_fanout ) );
  if ( arity < 2 || sc.ports.size() != 1 )
    throw validation_error( fmt::format( "splitter {} must have one input and at least two outputs", sc.name ) );

  struct sink_ref
  {
    int64_t instance; /* -1 for a primary output */
    std::size_t slot;
  };
  std::map<std::string, std::vector<sink_ref>> sinks;
  std::vector<std::string> order; /* nets in first-seen order */
  auto note = [&]( std::string const& net, sink_ref s ) {
    auto& v = sinks[net];
    if ( v.empty() )
      order.push_back( net );
    v.push_back( s );
  };
  for ( std::size_t i = 0; i < n.instances.size(); ++i )
  {
    auto const& c = lib.get_cell( n.instances[i].cell );
    for ( std::size_t k = 0; k < n.instances[i].pins.size(); ++k )
      if ( !c.is_output_pin( n.instances[i].pins[k].first ) && !n.instances[i].pins[k].second.empty() )
        note( n.instances[i].pins[k].second, { static_cast<int64_t>( i ), k } );
  }
  for ( std::size_t o = 0; o < n.outputs.size(); ++o )
    if ( !n.outputs[o].second.empty() )
      note( n.outputs[o].second, { -1, o } );

  uint32_t inserted = 0;
  std::vector<instance> added;
  for ( auto const& net : order )
  {
    auto const& s = sinks[net];
    if ( s.size() <= max_fanout )
      continue;
    uint32_t k = 0;
    std::function<void( std::string const&, std::size_t, std::size_t )> build = [&]( std::string const& src, std::size_t lo,
                                                                                   std::size_t hi ) {
      if ( hi - lo == 1 )
      {
        auto const& ref = s[lo];
        if ( ref.instance < 0 )
          n.outputs[ref.slot].second = src;
        else
          n.instances[static_cast<std::size_t>( ref.instance )].pins[ref.slot].second = src;
        return;
      }
      auto const id = k++;
      instance sp{ fmt::format( "spl_{}_{}", net, id ), sc.name, {} };
      sp.pins.emplace_back( sc.ports[0].name, src );
      auto const count = hi - lo;
      auto const parts = std::min<std::size_t>( arity, count );
      std::size_t start = lo;
      for ( std::size_t p = 0; p < sc.outputs.size(); ++p )
      {
        if ( p >= parts )
        {
          sp.pins.emplace_back( sc.outputs[p], fmt::format( "{}_s{}_nc{}", net, id, p ) );
          continue;
        }
        auto const size = count / parts + ( p < count % parts ? 1 : 0 );
        auto const out = fmt::format( "{}_s{}_{}", net, id, p );
        sp.pins.emplace_back( sc.outputs[p], out );
        auto const end = start + size;
        build( out, start, end );
        start = end;
      }
      added.push_back( std::move( sp ) );
      ++inserted;
    };
    build( net, 0, s.size() );
  }
  n.instances.insert( n.instances.end(), added.begin(), added.end() );
  if ( inserted )
    n.metadata["splitters"] = inserted;
  return inserted;
}

} // namespace fluxsynth
