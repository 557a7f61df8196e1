/*!
  \file cell.hpp
  \brief Pulse effects, library cells and supergates
*/

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <fmt/format.h>

#include "fsm.hpp"

namespace fluxsynth
{

/*! \brief What a pulse arriving at a port does to the 1-bit state. */
enum effect : uint8_t
{
  fx_set = 1,
  fx_clear = 2,
  fx_toggle = 4,
  fx_out = 8,
  fx_nout = 16
};

inline constexpr uint8_t fx_modify = fx_set | fx_clear | fx_toggle;
inline constexpr uint8_t fx_read = fx_out | fx_nout;

inline std::vector<std::string> effect_names( uint8_t fx )
{
  std::vector<std::string> names;
  if ( fx & fx_set )
    names.emplace_back( "set" );
  if ( fx & fx_clear )
    names.emplace_back( "clear" );
  if ( fx & fx_toggle )
    names.emplace_back( "toggle" );
  if ( fx & fx_out )
    names.emplace_back( "out" );
  if ( fx & fx_nout )
    names.emplace_back( "nout" );
  return names;
}

inline std::string effects_to_string( uint8_t fx )
{
  std::string s;
  for ( auto const& n : effect_names( fx ) )
    s += ( s.empty() ? "" : "," ) + n;
  return "{" + s + "}";
}

inline uint8_t effects_from_string( std::string const& name )
{
  if ( name == "set" )
    return fx_set;
  if ( name == "clear" )
    return fx_clear;
  if ( name == "toggle" )
    return fx_toggle;
  if ( name == "out" )
    return fx_out;
  if ( name == "nout" )
    return fx_nout;
  throw validation_error( fmt::format( "unknown effect '{}'", name ) );
}

/*! \brief Port type id of an effect set, for the seven sets that have one. */
inline std::optional<int> port_type( uint8_t fx )
{
  switch ( fx )
  {
  case fx_set:
    return 0;
  case fx_clear:
    return 1;
  case fx_toggle:
    return 2;
  case fx_out:
    return 3;
  case fx_out | fx_clear:
    return 4;
  case fx_nout | fx_clear:
    return 5;
  case fx_out | fx_nout | fx_clear:
    return 6;
  default:
    return std::nullopt;
  }
}

/*! \brief Sorted effect sets: the lookup key of a component, cell or supergate. */
using signature = std::vector<uint8_t>;

inline signature make_signature( std::vector<uint8_t> effects )
{
  std::sort( effects.begin(), effects.end(), []( uint8_t a, uint8_t b ) {
    auto const ta = port_type( a ), tb = port_type( b );
    if ( ta && tb )
      return *ta < *tb;
    if ( ta || tb )
      return ta.has_value();
    return a < b;
  } );
  return effects;
}

/*! \brief "(0,1,4)" when every set has a type id, otherwise the effect sets spelled out. */
inline std::string signature_to_string( signature const& sig )
{
  bool typed = std::all_of( sig.begin(), sig.end(), []( uint8_t fx ) { return port_type( fx ).has_value(); } );
  std::string s;
  for ( auto fx : sig )
    s += ( s.empty() ? "" : "," ) + ( typed ? std::to_string( *port_type( fx ) ) : effects_to_string( fx ) );
  return "(" + s + ")";
}

enum class cell_kind : uint8_t
{
  storage, /* one flux bit, ports act by their effect sets */
  and_,    /* two data flags, clock reads their conjunction and clears */
  or_,
  xor_,
  merge, /* confluence: any input pulse emits once per tick */
  split  /* every input pulse is copied to each output */
};

inline char const* to_string( cell_kind k )
{
  switch ( k )
  {
  case cell_kind::storage:
    return "storage";
  case cell_kind::and_:
    return "and";
  case cell_kind::or_:
    return "or";
  case cell_kind::xor_:
    return "xor";
  case cell_kind::merge:
    return "merge";
  case cell_kind::split:
    return "split";
  }
  return "?";
}

inline cell_kind cell_kind_from_string( std::string const& s )
{
  for ( auto k : { cell_kind::storage, cell_kind::and_, cell_kind::or_, cell_kind::xor_, cell_kind::merge, cell_kind::split } )
    if ( s == to_string( k ) )
      return k;
  throw validation_error( fmt::format( "unknown cell kind '{}'", s ) );
}

/*! \brief An input port. `out_pin`/`nout_pin` name the output pins its reads drive. */
struct cell_port
{
  std::string name;
  uint8_t effects{ 0 };
  std::string out_pin;
  std::string nout_pin;

  bool operator==( cell_port const& ) const = default;
};

struct cell
{
  std::string name;
  cell_kind kind{ cell_kind::storage };
  std::vector<cell_port> ports;      /* inputs */
  std::vector<std::string> outputs;  /* merge/split outputs; derived from ports otherwise */
  uint32_t jj_count{ 0 };
  double delay{ 0.0 }; /* ps */
  double power{ 0.0 }; /* uW */

  bool operator==( cell const& ) const = default;

  /*! \brief Output pins in order of first appearance. */
  std::vector<std::string> output_pins() const
  {
    if ( kind == cell_kind::merge || kind == cell_kind::split )
      return outputs;
    std::vector<std::string> pins;
    auto add = [&]( std::string const& p ) {
      if ( !p.empty() && std::find( pins.begin(), pins.end(), p ) == pins.end() )
        pins.push_back( p );
    };
    for ( auto const& p : ports )
    {
      add( p.out_pin );
      add( p.nout_pin );
    }
    return pins;
  }

  std::vector<std::string> pins() const
  {
    std::vector<std::string> all;
    for ( auto const& p : ports )
      all.push_back( p.name );
    for ( auto const& o : output_pins() )
      all.push_back( o );
    return all;
  }

  bool is_output_pin( std::string const& pin ) const
  {
    auto const outs = output_pins();
    return std::find( outs.begin(), outs.end(), pin ) != outs.end();
  }

  int port_index( std::string const& pin ) const
  {
    for ( std::size_t i = 0; i < ports.size(); ++i )
      if ( ports[i].name == pin )
        return static_cast<int>( i );
    return -1;
  }

  signature sig() const
  {
    std::vector<uint8_t> fx;
    for ( auto const& p : ports )
      fx.push_back( p.effects );
    return make_signature( fx );
  }
};

/*! \brief A cell instance: pins bound to nets, in the cell's pin order. */
struct instance
{
  std::string name;
  std::string cell;
  std::vector<std::pair<std::string, std::string>> pins; /* pin -> net */

  bool operator==( instance const& ) const = default;

  std::string const* net_of( std::string const& pin ) const
  {
    for ( auto const& [p, n] : pins )
      if ( p == pin )
        return &n;
    return nullptr;
  }
};

/*! \brief A stored mini-netlist behaving as one 1-bit component.
 *
 * Formal input ports appear as nets of the body; each port's out/nout pin
 * names the body net carrying its reads. Other body nets are internal.
 */
struct supergate
{
  std::string name;
  std::vector<cell_port> ports;
  std::vector<instance> body;

  bool operator==( supergate const& ) const = default;

  signature sig() const
  {
    std::vector<uint8_t> fx;
    for ( auto const& p : ports )
      fx.push_back( p.effects );
    return make_signature( fx );
  }
};

struct pdk
{
  std::string name;
  std::vector<cell> cells;
  std::vector<supergate> supergates;

  bool operator==( pdk const& ) const = default;

  cell const* find_cell( std::string const& n ) const
  {
    for ( auto const& c : cells )
      if ( c.name == n )
        return &c;
    return nullptr;
  }

  cell const& get_cell( std::string const& n ) const
  {
    if ( auto c = find_cell( n ) )
      return *c;
    throw validation_error( fmt::format( "unknown cell '{}'", n ) );
  }

  /*! \brief Cheapest cell of a kind (fewest junctions, then name). */
  cell const* cheapest( cell_kind k ) const
  {
    cell const* best = nullptr;
    for ( auto const& c : cells )
      if ( c.kind == k && ( !best || std::tie( c.jj_count, c.name ) < std::tie( best->jj_count, best->name ) ) )
        best = &c;
    return best;
  }

  /*! \brief Cheapest storage cell with exactly this signature. */
  cell const* storage_with( signature const& s ) const
  {
    cell const* best = nullptr;
    for ( auto const& c : cells )
      if ( c.kind == cell_kind::storage && c.sig() == s &&
           ( !best || std::tie( c.jj_count, c.name ) < std::tie( best->jj_count, best->name ) ) )
        best = &c;
    return best;
  }

  cell const& require( cell_kind k, char const* purpose ) const
  {
    if ( auto c = cheapest( k ) )
      return *c;
    throw validation_error( fmt::format( "library '{}' has no {} cell, needed for {}", name, to_string( k ), purpose ) );
  }
};

} // namespace fluxsynth
