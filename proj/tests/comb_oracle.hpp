#pragma once

/* Oracles for the path balancer: random DAG generator, brute-force depths,
 * per-net stage counts and a pulse-level truth-table comparison. */

#include <optional>
#include <random>
#include <set>
#include <string>

#include <fmt/format.h>

#include <fluxsynth/balancer.hpp>
#include <fluxsynth/netsim.hpp>

namespace fluxsynth::test
{

/* random DAG over `inputs` primary inputs and `gates` gates, fanins drawn from earlier nets */
inline comb_netlist random_dag( std::mt19937& rng, uint32_t inputs, uint32_t gates )
{
  comb_netlist n;
  n.name = "rnd";
  std::vector<std::string> nets;
  for ( uint32_t i = 0; i < inputs; ++i )
  {
    n.inputs.push_back( "i" + std::to_string( i ) );
    nets.push_back( n.inputs.back() );
  }
  for ( uint32_t g = 0; g < gates; ++g )
  {
    comb_gate gate;
    gate.name = "g" + std::to_string( g );
    gate.op = static_cast<comb_op>( rng() % 4 );
    auto const arity = gate.op == comb_op::not_ ? 1u : 2u;
    for ( uint32_t k = 0; k < arity; ++k )
      gate.fanins.push_back( nets[rng() % nets.size()] );
    nets.push_back( gate.name );
    n.gates.push_back( gate );
  }
  /* the last gates and one random net are outputs */
  n.outputs.push_back( nets.back() );
  if ( gates > 1 )
    n.outputs.push_back( nets[nets.size() - 2] );
  auto const extra = nets[rng() % nets.size()];
  if ( std::find( n.outputs.begin(), n.outputs.end(), extra ) == n.outputs.end() )
    n.outputs.push_back( extra );
  return n;
}

/* longest path by enumerating every path back to the primary inputs */
inline uint32_t brute_depth( comb_netlist const& n, std::string const& net )
{
  auto const* g = n.find( net );
  if ( !g )
    return 0;
  uint32_t best = 0;
  for ( auto const& f : g->fanins )
    best = std::max( best, 1 + brute_depth( n, f ) );
  return best;
}

/* set of clocked-instance counts over all paths from a primary input to `net` */
inline std::set<uint32_t> stage_counts( netlist const& n, pdk const& lib, std::string const& net )
{
  for ( auto const& i : n.instances )
  {
    auto const& c = lib.get_cell( i.cell );
    bool drives = false;
    for ( auto const& [pin, bound] : i.pins )
      drives = drives || ( bound == net && c.is_output_pin( pin ) );
    if ( !drives )
      continue;
    std::set<uint32_t> all;
    for ( auto const& [pin, bound] : i.pins )
    {
      if ( c.is_output_pin( pin ) || bound == clock_net || ( c.kind != cell_kind::split && pin == "clk" ) )
        continue;
      for ( auto s : stage_counts( n, lib, bound ) )
        all.insert( s + ( c.kind == cell_kind::split ? 0 : 1 ) );
    }
    return all;
  }
  return { 0 };
}

/* first gate or flip-flop output reached with more than one stage count, if any;
 * splitter outputs are covered through the cells they feed */
inline std::optional<std::string> unequal_stages( netlist const& n, pdk const& lib )
{
  for ( auto const& i : n.instances )
  {
    auto const& cl = lib.get_cell( i.cell );
    if ( cl.kind == cell_kind::split )
      continue;
    for ( auto const& [pin, net] : i.pins )
      if ( cl.is_output_pin( pin ) && stage_counts( n, lib, net ).size() != 1 )
        return net;
  }
  return std::nullopt;
}

/* applies the vector at tick 0, clocks `clocks` times, returns output pulses per tick */
inline std::map<int64_t, std::set<std::string>> run_wave( netlist const& n, pdk const& lib, comb_netlist const& c, uint32_t vec,
                                                          uint32_t clocks )
{
  std::vector<pulse_event> stim;
  for ( uint32_t i = 0; i < c.inputs.size(); ++i )
    if ( ( vec >> i ) & 1u )
      stim.push_back( { 0, c.inputs[i] } );
  for ( uint32_t k = 1; k <= clocks; ++k )
    stim.push_back( { k, clock_net } );
  std::map<int64_t, std::set<std::string>> got;
  for ( auto const& e : simulate( n, lib, stim, clocks + 1 ).outputs )
    got[e.tick].insert( e.signal );
  return got;
}

/* compares the pulse response of the balanced netlist with direct evaluation for every input vector */
inline std::optional<std::string> truth_table_mismatch( comb_netlist const& c, balance_result const& b, pdk const& lib,
                                                        bool aligned )
{
  uint32_t out_depth = 0;
  for ( auto const& o : c.outputs )
    out_depth = std::max( out_depth, b.depths.at( o ) );
  for ( uint32_t vec = 0; vec < ( 1u << c.inputs.size() ); ++vec )
  {
    std::vector<bool> values;
    for ( uint32_t i = 0; i < c.inputs.size(); ++i )
      values.push_back( ( vec >> i ) & 1u );
    auto const expect = evaluate_comb( c, values );
    auto const got = run_wave( b.net, lib, c, vec, out_depth );
    for ( std::size_t o = 0; o < c.outputs.size(); ++o )
    {
      auto const tick = aligned ? out_depth : b.depths.at( c.outputs[o] );
      auto const it = got.find( tick );
      bool const pulsed = it != got.end() && it->second.count( c.outputs[o] );
      if ( pulsed != expect[o] )
        return fmt::format( "vector {} output {}: expected {}, got {}", vec, c.outputs[o], expect[o], pulsed );
    }
  }
  return std::nullopt;
}

} // namespace fluxsynth::test
