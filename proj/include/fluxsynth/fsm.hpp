/*!
  \file fsm.hpp
  \brief Pulse-driven finite state machines: data model, text format, reference semantics

  Inputs are SFQ pulse events, not levels. A (state, signal) pair without a
  transition entry holds the current state. Outputs are Mealy-style: an output
  pulses when its triggering signal pulses in a given state.
*/

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <fmt/format.h>

namespace fluxsynth
{

/*! \brief Error raised for malformed FSM or stimulus text. */
class parse_error : public std::runtime_error
{
public:
  parse_error( uint32_t line, std::string const& message )
      : std::runtime_error( fmt::format( "line {}: {}", line, message ) ), line_( line )
  {
  }

  uint32_t line() const { return line_; }

private:
  uint32_t line_;
};

/*! \brief Error raised when an operation is applied to inconsistent data. */
class validation_error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

namespace detail
{

inline bool is_identifier( std::string_view s )
{
  if ( s.empty() )
    return false;
  auto const head = static_cast<unsigned char>( s.front() );
  if ( !( std::isalpha( head ) || head == '_' ) )
    return false;
  return std::all_of( s.begin(), s.end(), []( char c ) {
    auto const u = static_cast<unsigned char>( c );
    return std::isalnum( u ) || u == '_' || u == '.' || u == '[' || u == ']';
  } );
}

inline std::vector<std::string> split_words( std::string_view line )
{
  std::vector<std::string> words;
  std::size_t i = 0;
  while ( i < line.size() )
  {
    while ( i < line.size() && std::isspace( static_cast<unsigned char>( line[i] ) ) )
      ++i;
    std::size_t j = i;
    while ( j < line.size() && !std::isspace( static_cast<unsigned char>( line[j] ) ) )
      ++j;
    if ( j > i )
      words.emplace_back( line.substr( i, j - i ) );
    i = j;
  }
  return words;
}

inline std::string_view strip_comment( std::string_view line )
{
  if ( auto pos = line.find( '#' ); pos != std::string_view::npos )
    return line.substr( 0, pos );
  return line;
}

template<class Range>
std::optional<uint32_t> index_of( Range const& names, std::string_view name )
{
  auto it = std::find( names.begin(), names.end(), name );
  if ( it == names.end() )
    return std::nullopt;
  return static_cast<uint32_t>( std::distance( names.begin(), it ) );
}

inline std::string read_file( std::string const& path )
{
  std::ifstream in( path, std::ios::binary );
  if ( !in )
    throw std::runtime_error( fmt::format( "cannot open '{}'", path ) );
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace detail

/*! \brief A deterministic pulse-driven FSM.
 *
 * States, inputs, and outputs are referenced by their index in the
 * declaration lists. `transitions` stores only non-hold entries that were
 * declared in the source; `output_rules` holds (state, signal, output).
 */
struct finite_state_machine
{
  std::string name;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<std::string> states;
  uint32_t initial{ 0 };
  std::map<std::pair<uint32_t, uint32_t>, uint32_t> transitions;
  std::set<std::tuple<uint32_t, uint32_t, uint32_t>> output_rules;

  bool operator==( finite_state_machine const& ) const = default;

  uint32_t state_index( std::string_view s ) const
  {
    if ( auto i = detail::index_of( states, s ) )
      return *i;
    throw validation_error( fmt::format( "unknown state '{}'", s ) );
  }

  uint32_t input_index( std::string_view s ) const
  {
    if ( auto i = detail::index_of( inputs, s ) )
      return *i;
    throw validation_error( fmt::format( "unknown input signal '{}'", s ) );
  }

  uint32_t output_index( std::string_view s ) const
  {
    if ( auto i = detail::index_of( outputs, s ) )
      return *i;
    throw validation_error( fmt::format( "unknown output '{}'", s ) );
  }

  /*! \brief Next state for a pulse on `signal` in `state` (hold if absent). */
  uint32_t next_state( uint32_t state, uint32_t signal ) const
  {
    auto it = transitions.find( { state, signal } );
    return it == transitions.end() ? state : it->second;
  }
};

/*! \brief Parses the line-oriented FSM format.
 *
 * Grammar (one directive per line, `#` starts a comment):
 *
 *     .name <id>
 *     .inputs <id>...        (may repeat; appends)
 *     .outputs <id>...       (may repeat; appends)
 *     .states <id>...        (may repeat; appends)
 *     .initial <state>
 *     .trans <from> <signal> <to>
 *     .out <state> <signal> <output>
 *     .end
 *
 * Declarations must precede their use. Anything but blank lines or comments
 * after `.end` is an error.
 */
inline finite_state_machine parse_fsm( std::string_view text )
{
  finite_state_machine fsm;
  std::optional<uint32_t> initial;
  bool ended = false;
  bool named = false;

  auto declare = [&]( std::vector<std::string>& list, std::vector<std::string> const& words, uint32_t line ) {
    if ( words.size() < 2 )
      throw parse_error( line, fmt::format( "'{}' expects at least one identifier", words[0] ) );
    for ( std::size_t i = 1; i < words.size(); ++i )
    {
      if ( !detail::is_identifier( words[i] ) )
        throw parse_error( line, fmt::format( "invalid identifier '{}'", words[i] ) );
      if ( detail::index_of( fsm.inputs, words[i] ) || detail::index_of( fsm.outputs, words[i] ) ||
           detail::index_of( fsm.states, words[i] ) )
        throw parse_error( line, fmt::format( "duplicate declaration of '{}'", words[i] ) );
      list.push_back( words[i] );
    }
  };

  auto lookup = [&]( std::vector<std::string> const& list, std::string const& name, char const* what, uint32_t line ) {
    if ( auto i = detail::index_of( list, name ) )
      return *i;
    throw parse_error( line, fmt::format( "undeclared {} '{}'", what, name ) );
  };

  uint32_t line_no = 0;
  uint32_t last_line = 0;
  std::size_t pos = 0;
  while ( pos <= text.size() )
  {
    auto const eol = text.find( '\n', pos );
    auto const raw = text.substr( pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos );
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    auto const words = detail::split_words( detail::strip_comment( raw ) );
    if ( words.empty() )
      continue;
    last_line = line_no;
    if ( ended )
      throw parse_error( line_no, "content after .end" );

    auto const& kw = words[0];
    auto expect = [&]( std::size_t n ) {
      if ( words.size() != n )
        throw parse_error( line_no, fmt::format( "'{}' expects {} argument(s), got {}", kw, n - 1, words.size() - 1 ) );
    };

    if ( kw == ".name" )
    {
      expect( 2 );
      if ( named )
        throw parse_error( line_no, "duplicate .name" );
      if ( !detail::is_identifier( words[1] ) )
        throw parse_error( line_no, fmt::format( "invalid identifier '{}'", words[1] ) );
      fsm.name = words[1];
      named = true;
    }
    else if ( kw == ".inputs" )
      declare( fsm.inputs, words, line_no );
    else if ( kw == ".outputs" )
      declare( fsm.outputs, words, line_no );
    else if ( kw == ".states" )
      declare( fsm.states, words, line_no );
    else if ( kw == ".initial" )
    {
      expect( 2 );
      if ( initial )
        throw parse_error( line_no, "duplicate .initial" );
      initial = lookup( fsm.states, words[1], "state", line_no );
    }
    else if ( kw == ".trans" )
    {
      expect( 4 );
      auto const from = lookup( fsm.states, words[1], "state", line_no );
      auto const sig = lookup( fsm.inputs, words[2], "input signal", line_no );
      auto const to = lookup( fsm.states, words[3], "state", line_no );
      if ( !fsm.transitions.emplace( std::make_pair( from, sig ), to ).second )
        throw parse_error( line_no, fmt::format( "duplicate transition for ({}, {})", words[1], words[2] ) );
    }
    else if ( kw == ".out" )
    {
      expect( 4 );
      auto const st = lookup( fsm.states, words[1], "state", line_no );
      auto const sig = lookup( fsm.inputs, words[2], "input signal", line_no );
      auto const out = lookup( fsm.outputs, words[3], "output", line_no );
      fsm.output_rules.emplace( st, sig, out );
    }
    else if ( kw == ".end" )
    {
      expect( 1 );
      ended = true;
    }
    else
      throw parse_error( line_no, fmt::format( "unknown directive '{}'", kw ) );
  }

  if ( fsm.states.empty() )
    throw parse_error( last_line, "no states declared" );
  if ( !initial )
    throw parse_error( last_line, "missing .initial" );
  fsm.initial = *initial;
  if ( !named )
    fsm.name = "fsm";
  return fsm;
}

inline finite_state_machine read_fsm_file( std::string const& path )
{
  return parse_fsm( detail::read_file( path ) );
}

/*! \brief Canonical text form; transitions and rules in (state, signal) order. */
inline std::string write_fsm( finite_state_machine const& fsm )
{
  auto join = []( std::vector<std::string> const& v ) {
    std::string s;
    for ( auto const& x : v )
      s += " " + x;
    return s;
  };
  std::string out;
  out += fmt::format( ".name {}\n", fsm.name );
  if ( !fsm.inputs.empty() )
    out += fmt::format( ".inputs{}\n", join( fsm.inputs ) );
  if ( !fsm.outputs.empty() )
    out += fmt::format( ".outputs{}\n", join( fsm.outputs ) );
  out += fmt::format( ".states{}\n", join( fsm.states ) );
  out += fmt::format( ".initial {}\n", fsm.states[fsm.initial] );
  for ( auto const& [key, to] : fsm.transitions )
    out += fmt::format( ".trans {} {} {}\n", fsm.states[key.first], fsm.inputs[key.second], fsm.states[to] );
  for ( auto const& [st, sig, o] : fsm.output_rules )
    out += fmt::format( ".out {} {} {}\n", fsm.states[st], fsm.inputs[sig], fsm.outputs[o] );
  out += ".end\n";
  return out;
}

/*! \brief States not reachable from the initial state (warnings, not errors). */
inline std::vector<std::string> unreachable_states( finite_state_machine const& fsm )
{
  std::vector<bool> seen( fsm.states.size(), false );
  std::vector<uint32_t> stack{ fsm.initial };
  seen[fsm.initial] = true;
  while ( !stack.empty() )
  {
    auto const s = stack.back();
    stack.pop_back();
    for ( uint32_t sig = 0; sig < fsm.inputs.size(); ++sig )
    {
      auto const n = fsm.next_state( s, sig );
      if ( !seen[n] )
      {
        seen[n] = true;
        stack.push_back( n );
      }
    }
  }
  std::vector<std::string> result;
  for ( uint32_t i = 0; i < fsm.states.size(); ++i )
    if ( !seen[i] )
      result.push_back( fsm.states[i] );
  return result;
}

struct step_result
{
  uint32_t next;
  std::vector<uint32_t> outputs; /* ascending output indices */

  bool operator==( step_result const& ) const = default;
};

inline step_result fsm_step( finite_state_machine const& fsm, uint32_t state, uint32_t signal )
{
  step_result r{ fsm.next_state( state, signal ), {} };
  auto it = fsm.output_rules.lower_bound( { state, signal, 0u } );
  for ( ; it != fsm.output_rules.end() && std::get<0>( *it ) == state && std::get<1>( *it ) == signal; ++it )
    r.outputs.push_back( std::get<2>( *it ) );
  return r;
}

struct pulse_event
{
  int64_t tick{ 0 };
  std::string signal;

  auto operator<=>( pulse_event const& ) const = default;
};

/*! \brief Input stimulus together with the emitted output pulses. */
struct pulse_trace
{
  std::vector<pulse_event> inputs;
  std::vector<pulse_event> outputs;

  bool operator==( pulse_trace const& ) const = default;
};

/*! \brief Folds `fsm_step` over a stimulus starting from the initial state.
 *
 * Ticks must be non-decreasing with at most one input pulse per tick; output
 * pulses carry the tick of their triggering input.
 */
inline pulse_trace fsm_run( finite_state_machine const& fsm, std::vector<pulse_event> const& stimulus )
{
  pulse_trace trace;
  trace.inputs = stimulus;
  uint32_t state = fsm.initial;
  std::optional<int64_t> last;
  for ( auto const& ev : stimulus )
  {
    if ( last && ev.tick <= *last )
      throw validation_error( ev.tick == *last
                                  ? fmt::format( "simultaneous input pulses at tick {}", ev.tick )
                                  : fmt::format( "stimulus ticks decrease at tick {}", ev.tick ) );
    last = ev.tick;
    auto const r = fsm_step( fsm, state, fsm.input_index( ev.signal ) );
    for ( auto o : r.outputs )
      trace.outputs.push_back( { ev.tick, fsm.outputs[o] } );
    state = r.next;
  }
  return trace;
}

/*! \brief Parses a stimulus file: lines of `<tick> <signal>`, `#` comments. */
inline std::vector<pulse_event> parse_stimulus( std::string_view text )
{
  std::vector<pulse_event> events;
  std::istringstream in{ std::string( text ) };
  std::string line;
  uint32_t line_no = 0;
  while ( std::getline( in, line ) )
  {
    ++line_no;
    auto const words = detail::split_words( detail::strip_comment( line ) );
    if ( words.empty() )
      continue;
    if ( words.size() != 2 )
      throw parse_error( line_no, "expected '<tick> <signal>'" );
    int64_t tick = 0;
    try
    {
      std::size_t used = 0;
      tick = std::stoll( words[0], &used );
      if ( used != words[0].size() || tick < 0 )
        throw std::invalid_argument( "tick" );
    }
    catch ( std::exception const& )
    {
      throw parse_error( line_no, fmt::format( "invalid tick '{}'", words[0] ) );
    }
    if ( !events.empty() && tick < events.back().tick )
      throw parse_error( line_no, "ticks must be non-decreasing" );
    events.push_back( { tick, words[1] } );
  }
  return events;
}

inline std::string write_stimulus( std::vector<pulse_event> const& events )
{
  std::string out;
  for ( auto const& e : events )
    out += fmt::format( "{} {}\n", e.tick, e.signal );
  return out;
}

} // namespace fluxsynth
