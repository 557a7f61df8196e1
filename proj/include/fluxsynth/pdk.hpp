/*!
  \file pdk.hpp
  \brief Reading, writing and validating cell libraries

  Document layout:

      { "name": "...",
        "cells": [
          { "name": "NDRO", "kind": "storage",
            "ports": [ { "name": "din", "effects": ["set"], "type": 0 },
                       { "name": "rst", "effects": ["clear"], "type": 1 },
                       { "name": "clk", "effects": ["out"], "type": 3, "out_pin": "q" } ],
            "jj_count": 11, "delay": 6.0, "power": 1.1 },
          { "name": "CB", "kind": "merge", "inputs": ["a", "b"], "outputs": ["q"], ... } ],
        "supergates": [
          { "name": "...", "ports": [ ...as cell ports, pins name body nets... ],
            "body": [ { "name": "...", "cell": "...", "pins": { "pin": "net" } } ] } ] }

  `kind` defaults to "storage"; "and", "or" and "xor" cells have two data
  ports with effects ["set"] and a clock port with ["out", "clear"].
*/

#pragma once

#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "cell.hpp"
#include "netlist.hpp"
#include "netsim.hpp"

namespace fluxsynth
{

namespace detail
{

inline cell_port port_from_json( ordered_json const& j, std::string const& owner )
{
  cell_port p;
  p.name = j.at( "name" ).get<std::string>();
  for ( auto const& e : j.at( "effects" ) )
    p.effects |= effects_from_string( e.get<std::string>() );
  if ( j.contains( "out_pin" ) )
    p.out_pin = j.at( "out_pin" ).get<std::string>();
  if ( j.contains( "nout_pin" ) )
    p.nout_pin = j.at( "nout_pin" ).get<std::string>();
  if ( p.effects == 0 )
    throw validation_error( fmt::format( "{}: port {} has no effects", owner, p.name ) );
  if ( j.contains( "type" ) )
  {
    auto const declared = j.at( "type" ).get<int>();
    auto const actual = port_type( p.effects );
    if ( !actual || *actual != declared )
      throw validation_error( fmt::format( "{}: port {} declares type {} but its effects {} {}", owner, p.name, declared,
                                           effects_to_string( p.effects ),
                                           actual ? fmt::format( "have type {}", *actual ) : std::string( "have no type id" ) ) );
  }
  if ( ( p.effects & fx_out ) && p.out_pin.empty() )
    throw validation_error( fmt::format( "{}: port {} reads but names no out_pin", owner, p.name ) );
  if ( ( p.effects & fx_nout ) && p.nout_pin.empty() )
    throw validation_error( fmt::format( "{}: port {} reads the complement but names no nout_pin", owner, p.name ) );
  if ( !( p.effects & fx_out ) && !p.out_pin.empty() )
    throw validation_error( fmt::format( "{}: port {} has an out_pin but no out effect", owner, p.name ) );
  if ( !( p.effects & fx_nout ) && !p.nout_pin.empty() )
    throw validation_error( fmt::format( "{}: port {} has a nout_pin but no nout effect", owner, p.name ) );
  return p;
}

inline ordered_json port_to_json( cell_port const& p )
{
  ordered_json j;
  j["name"] = p.name;
  j["effects"] = effect_names( p.effects );
  if ( auto t = port_type( p.effects ) )
    j["type"] = *t;
  if ( !p.out_pin.empty() )
    j["out_pin"] = p.out_pin;
  if ( !p.nout_pin.empty() )
    j["nout_pin"] = p.nout_pin;
  return j;
}

inline void check_cell( cell const& c )
{
  auto const where = "cell " + c.name;
  std::set<std::string> pins;
  for ( auto const& p : c.pins() )
    if ( !pins.insert( p ).second )
      throw validation_error( fmt::format( "{}: duplicate pin {}", where, p ) );
  switch ( c.kind )
  {
  case cell_kind::storage:
    if ( c.ports.empty() )
      throw validation_error( where + ": no ports" );
    break;
  case cell_kind::and_:
  case cell_kind::or_:
  case cell_kind::xor_:
  {
    uint32_t data = 0, clock = 0;
    for ( auto const& p : c.ports )
    {
      data += p.effects == fx_set;
      clock += p.effects == ( fx_out | fx_clear );
    }
    if ( c.ports.size() != 3 || data != 2 || clock != 1 )
      throw validation_error( where + ": needs two [set] data ports and one [out, clear] clock port" );
    break;
  }
  case cell_kind::merge:
    if ( c.ports.size() < 2 || c.outputs.size() != 1 )
      throw validation_error( where + ": a merge cell needs at least two inputs and one output" );
    break;
  case cell_kind::split:
    if ( c.ports.size() != 1 || c.outputs.size() < 2 )
      throw validation_error( where + ": a split cell needs one input and at least two outputs" );
    break;
  }
}

/* body of a supergate as a netlist whose inputs are the formal ports */
inline netlist supergate_body( supergate const& g )
{
  netlist n;
  n.name = g.name;
  for ( auto const& p : g.ports )
    n.inputs.push_back( p.name );
  for ( auto const& p : g.ports )
  {
    if ( !p.out_pin.empty() )
      n.outputs.emplace_back( p.out_pin, p.out_pin );
    if ( !p.nout_pin.empty() )
      n.outputs.emplace_back( p.nout_pin, p.nout_pin );
  }
  std::sort( n.outputs.begin(), n.outputs.end() );
  n.outputs.erase( std::unique( n.outputs.begin(), n.outputs.end() ), n.outputs.end() );
  n.instances = g.body;
  return n;
}

/* replays every port sequence up to `depth` against the 1-bit reference */
inline void check_supergate( supergate const& g, pdk const& lib, uint32_t depth = 4 )
{
  auto const where = "supergate " + g.name;
  if ( g.ports.empty() || g.body.empty() )
    throw validation_error( where + ": needs ports and a body" );
  for ( auto const& inst : g.body )
  {
    auto const* c = lib.find_cell( inst.cell );
    if ( !c )
      throw validation_error( fmt::format( "{}: body instance {} uses unknown cell {}", where, inst.name, inst.cell ) );
    for ( auto const& pin : c->pins() )
      if ( !inst.net_of( pin ) )
        throw validation_error( fmt::format( "{}: body instance {} leaves pin {} unbound", where, inst.name, pin ) );
  }
  auto const body = supergate_body( g );
  simulator sim( body, lib );

  std::vector<uint32_t> seq;
  std::function<void( bool )> dfs = [&]( bool state ) {
    if ( seq.size() == depth )
      return;
    auto const saved = sim.state();
    for ( uint32_t p = 0; p < g.ports.size(); ++p )
    {
      seq.push_back( p );
      auto const& port = g.ports[p];
      std::set<std::string> expect;
      if ( ( port.effects & fx_out ) && state )
        expect.insert( port.out_pin );
      if ( ( port.effects & fx_nout ) && !state )
        expect.insert( port.nout_pin );
      bool next = state;
      if ( port.effects & fx_set )
        next = true;
      if ( port.effects & fx_clear )
        next = false;
      if ( port.effects & fx_toggle )
        next = !next;
      std::set<std::string> got;
      for ( auto o : sim.step( { p } ) )
        got.insert( body.outputs[o].first );
      if ( got != expect )
      {
        std::string trace;
        for ( auto q : seq )
          trace += ( trace.empty() ? "" : "," ) + g.ports[q].name;
        throw validation_error( fmt::format( "{}: body disagrees with its signature after pulses [{}]", where, trace ) );
      }
      dfs( next );
      seq.pop_back();
      sim.restore( saved );
    }
  };
  dfs( false );
}

} // namespace detail

inline pdk pdk_from_json( ordered_json const& j )
{
  pdk lib;
  try
  {
    lib.name = j.value( "name", std::string( "pdk" ) );
    std::set<std::string> names;
    for ( auto const& cj : j.at( "cells" ) )
    {
      cell c;
      c.name = cj.at( "name" ).get<std::string>();
      c.kind = cell_kind_from_string( cj.value( "kind", std::string( "storage" ) ) );
      if ( c.kind == cell_kind::merge || c.kind == cell_kind::split )
      {
        for ( auto const& i : cj.at( "inputs" ) )
          c.ports.push_back( { i.get<std::string>(), 0, "", "" } );
        c.outputs = cj.at( "outputs" ).get<std::vector<std::string>>();
      }
      else
        for ( auto const& pj : cj.at( "ports" ) )
          c.ports.push_back( detail::port_from_json( pj, "cell " + c.name ) );
      c.jj_count = cj.value( "jj_count", 0u );
      c.delay = cj.value( "delay", 0.0 );
      c.power = cj.value( "power", 0.0 );
      if ( !names.insert( c.name ).second )
        throw validation_error( fmt::format( "duplicate cell '{}'", c.name ) );
      detail::check_cell( c );
      lib.cells.push_back( std::move( c ) );
    }
    if ( lib.cells.empty() )
      throw validation_error( "library has no cells" );
    if ( j.contains( "supergates" ) )
      for ( auto const& gj : j.at( "supergates" ) )
      {
        supergate g;
        g.name = gj.at( "name" ).get<std::string>();
        for ( auto const& pj : gj.at( "ports" ) )
          g.ports.push_back( detail::port_from_json( pj, "supergate " + g.name ) );
        for ( auto const& ij : gj.at( "body" ) )
        {
          instance i{ ij.at( "name" ).get<std::string>(), ij.at( "cell" ).get<std::string>(), {} };
          for ( auto const& [pin, net] : ij.at( "pins" ).items() )
            i.pins.emplace_back( pin, net.get<std::string>() );
          g.body.push_back( std::move( i ) );
        }
        if ( !names.insert( g.name ).second )
          throw validation_error( fmt::format( "duplicate cell or supergate '{}'", g.name ) );
        lib.supergates.push_back( std::move( g ) );
      }
  }
  catch ( nlohmann::json::exception const& e )
  {
    throw validation_error( fmt::format( "malformed library: {}", e.what() ) );
  }
  for ( auto const& g : lib.supergates )
    detail::check_supergate( g, lib );
  return lib;
}

inline pdk parse_pdk( std::string const& text )
{
  try
  {
    return pdk_from_json( ordered_json::parse( text ) );
  }
  catch ( nlohmann::json::parse_error const& e )
  {
    throw validation_error( fmt::format( "library is not valid JSON: {}", e.what() ) );
  }
}

inline pdk load_pdk( std::string const& path )
{
  return parse_pdk( detail::read_file( path ) );
}

inline ordered_json to_json( pdk const& lib )
{
  ordered_json j;
  j["name"] = lib.name;
  j["cells"] = ordered_json::array();
  for ( auto const& c : lib.cells )
  {
    ordered_json cj;
    cj["name"] = c.name;
    cj["kind"] = to_string( c.kind );
    if ( c.kind == cell_kind::merge || c.kind == cell_kind::split )
    {
      cj["inputs"] = ordered_json::array();
      for ( auto const& p : c.ports )
        cj["inputs"].push_back( p.name );
      cj["outputs"] = c.outputs;
    }
    else
    {
      cj["ports"] = ordered_json::array();
      for ( auto const& p : c.ports )
        cj["ports"].push_back( detail::port_to_json( p ) );
    }
    cj["jj_count"] = c.jj_count;
    cj["delay"] = c.delay;
    cj["power"] = c.power;
    j["cells"].push_back( cj );
  }
  j["supergates"] = ordered_json::array();
  for ( auto const& g : lib.supergates )
  {
    ordered_json gj;
    gj["name"] = g.name;
    gj["ports"] = ordered_json::array();
    for ( auto const& p : g.ports )
      gj["ports"].push_back( detail::port_to_json( p ) );
    gj["body"] = ordered_json::array();
    for ( auto const& i : g.body )
    {
      ordered_json pins = ordered_json::object();
      for ( auto const& [pin, net] : i.pins )
        pins[pin] = net;
      gj["body"].push_back( { { "name", i.name }, { "cell", i.cell }, { "pins", pins } } );
    }
    j["supergates"].push_back( gj );
  }
  return j;
}

/*! \brief Path of the bundled sample library, overridable through FLUXSYNTH_PDK. */
inline std::string default_pdk_path()
{
  if ( auto const* env = std::getenv( "FLUXSYNTH_PDK" ); env && *env )
    return env;
#ifdef FLUXSYNTH_DATA_DIR
  return std::string( FLUXSYNTH_DATA_DIR ) + "/pdk/sample.json";
#else
  return "data/pdk/sample.json";
#endif
}

} // namespace fluxsynth
