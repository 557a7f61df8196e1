/*!
  \file netlist.hpp
  \brief Mapped netlists and their JSON / structural text forms

  JSON schema (keys in this order):

      { "format": "fluxsynth-netlist", "version": 1, "name": ...,
        "inputs": [names], "outputs": [{"name": ..., "net": ...}],
        "instances": [{"name": ..., "cell": ..., "pins": {pin: net}}],
        "metadata": {...} }

  Primary inputs are nets named after the input. An output may name an input
  net directly.
*/

#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cell.hpp"

namespace fluxsynth
{

using ordered_json = nlohmann::ordered_json;

struct netlist
{
  std::string name;
  std::vector<std::string> inputs;
  std::vector<std::pair<std::string, std::string>> outputs; /* output name -> net */
  std::vector<instance> instances;
  ordered_json metadata = ordered_json::object();

  bool operator==( netlist const& ) const = default;

  /*! \brief Instances per cell name, split cells excluded when `lib` is given. */
  std::map<std::string, uint32_t> census( pdk const* lib = nullptr ) const
  {
    std::map<std::string, uint32_t> c;
    for ( auto const& i : instances )
    {
      if ( lib )
        if ( auto const* cl = lib->find_cell( i.cell ); cl && cl->kind == cell_kind::split )
          continue;
      ++c[i.cell];
    }
    return c;
  }

  /*! \brief Nets driven by a primary input or an instance output pin. */
  std::set<std::string> driven_nets( pdk const& lib ) const
  {
    std::set<std::string> d( inputs.begin(), inputs.end() );
    for ( auto const& i : instances )
    {
      auto const& c = lib.get_cell( i.cell );
      for ( auto const& [pin, net] : i.pins )
        if ( c.is_output_pin( pin ) )
          d.insert( net );
    }
    return d;
  }
};

inline constexpr char const* netlist_format_tag = "fluxsynth-netlist";

inline ordered_json to_json( netlist const& n )
{
  ordered_json j;
  j["format"] = netlist_format_tag;
  j["version"] = 1;
  j["name"] = n.name;
  j["inputs"] = n.inputs;
  j["outputs"] = ordered_json::array();
  for ( auto const& [name, net] : n.outputs )
    j["outputs"].push_back( { { "name", name }, { "net", net } } );
  j["instances"] = ordered_json::array();
  for ( auto const& i : n.instances )
  {
    ordered_json pins = ordered_json::object();
    for ( auto const& [pin, net] : i.pins )
      pins[pin] = net;
    j["instances"].push_back( { { "name", i.name }, { "cell", i.cell }, { "pins", pins } } );
  }
  j["metadata"] = n.metadata;
  return j;
}

inline netlist netlist_from_json( ordered_json const& j )
{
  try
  {
    if ( j.at( "format" ).get<std::string>() != netlist_format_tag )
      throw validation_error( "not a fluxsynth netlist document" );
    if ( j.at( "version" ).get<int>() != 1 )
      throw validation_error( "unsupported netlist version" );
    netlist n;
    n.name = j.at( "name" ).get<std::string>();
    n.inputs = j.at( "inputs" ).get<std::vector<std::string>>();
    for ( auto const& o : j.at( "outputs" ) )
      n.outputs.emplace_back( o.at( "name" ).get<std::string>(), o.at( "net" ).get<std::string>() );
    for ( auto const& ij : j.at( "instances" ) )
    {
      instance i{ ij.at( "name" ).get<std::string>(), ij.at( "cell" ).get<std::string>(), {} };
      for ( auto const& [pin, net] : ij.at( "pins" ).items() )
        i.pins.emplace_back( pin, net.get<std::string>() );
      n.instances.push_back( std::move( i ) );
    }
    if ( j.contains( "metadata" ) )
      n.metadata = j.at( "metadata" );
    return n;
  }
  catch ( nlohmann::json::exception const& e )
  {
    throw validation_error( fmt::format( "malformed netlist: {}", e.what() ) );
  }
}

inline std::string write_netlist_json( netlist const& n )
{
  return to_json( n ).dump( 2 ) + "\n";
}

inline netlist read_netlist_json( std::string const& text )
{
  try
  {
    return netlist_from_json( ordered_json::parse( text ) );
  }
  catch ( nlohmann::json::parse_error const& e )
  {
    throw validation_error( fmt::format( "netlist is not valid JSON: {}", e.what() ) );
  }
}

/*! \brief Verilog-like structural text; aliases of outputs become `assign`s. */
inline std::string write_netlist_hdl( netlist const& n )
{
  auto list = []( std::vector<std::string> const& v ) {
    std::string s;
    for ( auto const& x : v )
      s += ( s.empty() ? "" : ", " ) + x;
    return s;
  };
  std::vector<std::string> outs, ports = n.inputs;
  for ( auto const& [name, net] : n.outputs )
  {
    outs.push_back( name );
    ports.push_back( name );
  }

  std::set<std::string> io( ports.begin(), ports.end() );
  std::vector<std::string> wires;
  std::set<std::string> seen;
  for ( auto const& i : n.instances )
    for ( auto const& [pin, net] : i.pins )
      if ( !io.count( net ) && seen.insert( net ).second )
        wires.push_back( net );

  std::string s = fmt::format( "module {}({});\n", n.name, list( ports ) );
  if ( !n.inputs.empty() )
    s += fmt::format( "  input {};\n", list( n.inputs ) );
  if ( !outs.empty() )
    s += fmt::format( "  output {};\n", list( outs ) );
  if ( !wires.empty() )
    s += fmt::format( "  wire {};\n", list( wires ) );
  for ( auto const& i : n.instances )
  {
    std::string pins;
    for ( auto const& [pin, net] : i.pins )
      pins += fmt::format( "{}.{}({})", pins.empty() ? "" : ", ", pin, net );
    s += fmt::format( "  {} {} ({});\n", i.cell, i.name, pins );
  }
  for ( auto const& [name, net] : n.outputs )
    if ( name != net )
      s += fmt::format( "  assign {} = {};\n", name, net.empty() ? "1'b0" : net );
  s += "endmodule\n";
  return s;
}

} // namespace fluxsynth
