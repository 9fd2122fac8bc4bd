# coding:utf-8
