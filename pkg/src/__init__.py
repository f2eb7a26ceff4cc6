"""Workbench for level-set characterizations of Sobolev seminorms in ball Banach function spaces."""
